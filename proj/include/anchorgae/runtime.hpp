#pragma once

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace anchorgae {

/// Keeps freed large blocks in the heap instead of returning them to the OS.
/// Training allocates the same n x m temporaries every epoch; without this
/// each one is a fresh mmap and pays its page faults again.
inline void tune_allocator() {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
}

}  // namespace anchorgae

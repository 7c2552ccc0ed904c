#pragma once

#ifdef __GLIBC__
#include <malloc.h>
#endif

namespace iconnet {

/// Keeps freed heap pages mapped. Training allocates and frees many
/// medium-sized matrices per step; without this glibc returns them to the
/// kernel and refaults them on every batch.
inline void tune_allocator() {
#ifdef __GLIBC__
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
}

}  // namespace iconnet

#pragma once

#ifdef __GLIBC__
#include <malloc.h>
#endif

namespace jcdi::par {

/// Keeps multi-megabyte activation buffers on the heap free list instead of
/// round-tripping them through mmap; the per-step tape otherwise pays a page
/// fault per touched page. Call once at program start.
inline void tune_allocator() {
#ifdef __GLIBC__
    mallopt(M_MMAP_THRESHOLD, 512 * 1024 * 1024);
    mallopt(M_TRIM_THRESHOLD, 512 * 1024 * 1024);
#endif
}

}  // namespace jcdi::par

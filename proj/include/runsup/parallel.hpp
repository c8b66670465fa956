#pragma once

#include <atomic>
#include <cstddef>
#include <functional>
#include <thread>
#include <vector>

namespace runsup {

// Process-wide worker count. Results of every parallel loop in this project
// are required to be byte-identical for any setting, so this only controls
// how fast chunks are drained, never how work is partitioned.
void set_thread_count(int n);
int thread_count();

// Runs fn(begin, end, chunk_index) over [0, n_items) split into fixed-size
// chunks. Chunk boundaries depend only on (n_items, chunk_size); workers pull
// chunk indices from a shared counter and must write only to chunk-owned
// storage. Exceptions from workers are rethrown on the calling thread.
void parallel_chunks(std::size_t n_items, std::size_t chunk_size,
                     const std::function<void(std::size_t, std::size_t, std::size_t)>& fn);

// Number of chunks parallel_chunks will use for the given sizes.
std::size_t chunk_count(std::size_t n_items, std::size_t chunk_size);

}  // namespace runsup

#pragma once

#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

namespace rfcw {

template <class R>
std::vector<R> parallel_map(std::uint64_t count, int threads, const std::function<R(std::uint64_t)>& f) {
  std::vector<R> out(count);
  threads = resolve_threads(threads);
  if (threads <= 1 || count <= 1) {
    for (std::uint64_t i = 0; i < count; ++i) out[i] = f(i);
    return out;
  }
  std::atomic<std::uint64_t> next{0};
  std::exception_ptr err;
  std::mutex mu;
  auto worker = [&] {
    for (;;) {
      std::uint64_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        out[i] = f(i);
      } catch (...) {
        std::lock_guard<std::mutex> lk(mu);
        if (!err) err = std::current_exception();
        next = count;
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);
  return out;
}

}  // namespace rfcw

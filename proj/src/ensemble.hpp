#pragma once

// Trajectory fan-out shared by the protocol drivers. Each trajectory fills
// its own row; rows are combined in index order, so results do not depend
// on the number of workers or the order they finish in.

#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

#include "cwdd/series.hpp"

namespace cwdd::detail {

template <typename PerTrajectory>
std::vector<std::vector<double>> run_rows(std::size_t count, unsigned threads,
                                          PerTrajectory&& per_trajectory) {
  std::vector<std::vector<double>> rows(count);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        rows[i] = per_trajectory(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = count;
        return;
      }
    }
  };

  const unsigned n = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(count)));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned k = 0; k < n; ++k) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);
  return rows;
}

inline TimeSeries aggregate(std::string abscissa, std::vector<double> x,
                            const std::vector<std::vector<double>>& rows) {
  TimeSeries out;
  out.abscissa_name = std::move(abscissa);
  out.x = std::move(x);
  out.trajectories = rows.size();
  const std::size_t m = out.x.size();
  out.mean.assign(m, 0.0);
  out.stderr_.assign(m, 0.0);
  const double n = static_cast<double>(rows.size());
  for (const auto& row : rows)
    for (std::size_t k = 0; k < m; ++k) out.mean[k] += row[k];
  for (std::size_t k = 0; k < m; ++k) out.mean[k] /= n;
  if (rows.size() > 1) {
    for (const auto& row : rows)
      for (std::size_t k = 0; k < m; ++k) out.stderr_[k] += (row[k] - out.mean[k]) * (row[k] - out.mean[k]);
    for (std::size_t k = 0; k < m; ++k) out.stderr_[k] = std::sqrt(out.stderr_[k] / (n - 1) / n);
  }
  return out;
}

}  // namespace cwdd::detail

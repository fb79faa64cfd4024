// SPDX-License-Identifier: Apache-2.0
//
// wchlab - dimensionality-guided sizing laboratory for wireless channel models
// Copyright (C) 2026 the wchlab authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#ifndef WCH_PARALLEL_HPP
#define WCH_PARALLEL_HPP

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace wch {

/// Process-wide worker count used by parallel_for when callers pass 0.
/// The CLI sets this from --threads; library defaults stay single-threaded
/// so that results never depend on the machine it runs on.
inline int &global_threads() {
    static int n = 1;
    return n;
}

/// Runs fn(i) for i in [0, n). Work items must write only to their own index;
/// under that contract the result is bit-identical for every thread count.
template <typename Fn>
void parallel_for(std::size_t n, Fn &&fn, int threads = 0) {
    if (threads <= 0)
        threads = global_threads();
    threads = std::max(1, std::min<int>(threads, int(n)));
    if (threads == 1 || n < 2) {
        for (std::size_t i = 0; i < n; ++i)
            fn(i);
        return;
    }
    std::atomic<std::size_t> next(0);
    std::exception_ptr error;
    std::atomic<bool> failed(false);
    auto worker = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n || failed.load())
                return;
            try {
                fn(i);
            } catch (...) {
                if (!failed.exchange(true))
                    error = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(std::size_t(threads) - 1);
    for (int t = 1; t < threads; ++t)
        pool.emplace_back(worker);
    worker();
    for (auto &th : pool)
        th.join();
    if (failed.load() && error)
        std::rethrow_exception(error);
}

} // namespace wch

#endif

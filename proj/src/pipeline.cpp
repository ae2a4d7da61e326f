#include "bpj/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <thread>

#include "bpj/common.hpp"

namespace bpj {

int resolve_workers(int requested) {
    int n = requested;
    if (n <= 0) n = static_cast<int>(std::thread::hardware_concurrency());
    if (n <= 0) n = 1;
    if (const char* env = std::getenv("BPJ_THREADS")) {
        char* end = nullptr;
        const long cap = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && cap > 0 && cap < static_cast<long>(n)) {
            n = static_cast<int>(cap);
        }
    }
    return n;
}

void parallel_for(int n, int workers, const std::function<void(int)>& fn) {
    if (n <= 0) return;
    workers = std::clamp(workers, 1, n);
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n));
    if (workers == 1) {
        for (int i = 0; i < n; ++i) {
            try {
                fn(i);
            } catch (...) {
                errors[static_cast<std::size_t>(i)] = std::current_exception();
            }
        }
    } else {
        std::atomic<int> next{0};
        auto run = [&] {
            for (;;) {
                const int i = next.fetch_add(1, std::memory_order_relaxed);
                if (i >= n) return;
                try {
                    fn(i);
                } catch (...) {
                    errors[static_cast<std::size_t>(i)] = std::current_exception();
                }
            }
        };
        std::vector<std::thread> threads;
        threads.reserve(static_cast<std::size_t>(workers));
        for (int t = 0; t < workers; ++t) threads.emplace_back(run);
        for (std::thread& th : threads) th.join();
    }
    for (const std::exception_ptr& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

std::vector<DetectionRecord> decode_batch(const std::vector<std::vector<GridTensor>>& image_grids,
                                          const GridSpec& spec, const DecodeConfig& config,
                                          const std::vector<std::string>& image_ids, int workers,
                                          std::vector<DecodeStats>* stats) {
    if (image_grids.size() != image_ids.size()) {
        throw DataError("decode_batch: " + std::to_string(image_grids.size()) +
                        " grid stacks but " + std::to_string(image_ids.size()) + " image ids");
    }
    const int n = static_cast<int>(image_grids.size());
    std::vector<DetectionRecord> records(static_cast<std::size_t>(n));
    if (stats) {
        stats->assign(static_cast<std::size_t>(n), DecodeStats{});
    }
    parallel_for(n, resolve_workers(workers), [&](int i) {
        const std::size_t u = static_cast<std::size_t>(i);
        records[u] = decode_image(image_grids[u], spec, config, image_ids[u],
                                  stats ? &(*stats)[u] : nullptr);
    });
    return records;
}

std::vector<Scene> gen_scenes_parallel(const SynthConfig& config, int workers) {
    config.validate();
    std::vector<Scene> scenes(static_cast<std::size_t>(config.n_images));
    parallel_for(config.n_images, resolve_workers(workers),
                 [&](int i) { scenes[static_cast<std::size_t>(i)] = gen_scene(config, i); });
    return scenes;
}

std::vector<AssignResult> assign_batch(const std::vector<Scene>& scenes, const GridSpec& spec,
                                       const AssignConfig& config, int workers) {
    std::vector<AssignResult> results(scenes.size());
    parallel_for(static_cast<int>(scenes.size()), resolve_workers(workers), [&](int i) {
        results[static_cast<std::size_t>(i)] = assign(scenes[static_cast<std::size_t>(i)], spec, config);
    });
    return results;
}

}  // namespace bpj

#pragma once

#include <functional>
#include <string>
#include <vector>

#include "bpj/assigner.hpp"
#include "bpj/decoder.hpp"
#include "bpj/detections.hpp"
#include "bpj/grid_spec.hpp"
#include "bpj/scene.hpp"
#include "bpj/synth.hpp"

/// Batch execution helpers.  Images are independent throughout the engine, so
/// batches fan out across a small thread pool; every function here fills its
/// result vector by input index, which makes the output bytes identical at any
/// worker count.

namespace bpj {

/// Number of worker threads to use.  `requested` <= 0 means one per hardware
/// thread.  The BPJ_THREADS environment variable, when set to a positive
/// integer, caps the result ("BPJ_THREADS=0" or an unparsable value leaves the
/// automatic choice in place).  Always returns at least 1.
int resolve_workers(int requested = 0);

/// Runs fn(i) once for every i in [0, n) across min(workers, n) threads with
/// dynamic hand-out.  If any call throws, every index still runs, and the
/// exception raised for the lowest failing index is rethrown on the calling
/// thread, so failures do not depend on scheduling.
void parallel_for(int n, int workers, const std::function<void(int)>& fn);

/// Decodes one grid stack per image into detection records, in input order.
/// `image_grids[i]` holds the ascending-stride grids for `image_ids[i]`.
/// When `stats` is non-null it is resized to one entry per image.
std::vector<DetectionRecord> decode_batch(const std::vector<std::vector<GridTensor>>& image_grids,
                                          const GridSpec& spec, const DecodeConfig& config,
                                          const std::vector<std::string>& image_ids,
                                          int workers = 0,
                                          std::vector<DecodeStats>* stats = nullptr);

/// Same scenes as gen_scenes(config) (images draw from per-index substreams,
/// so the batch can be produced in any order), computed in parallel.
std::vector<Scene> gen_scenes_parallel(const SynthConfig& config, int workers = 0);

/// One assignment result per scene, in input order.
std::vector<AssignResult> assign_batch(const std::vector<Scene>& scenes, const GridSpec& spec,
                                       const AssignConfig& config = {}, int workers = 0);

}  // namespace bpj

// SPDX-License-Identifier: Apache-2.0
#include "homer/pipeline.hpp"

#include <atomic>
#include <chrono>
#include <map>
#include <memory>

#include "homer/error.hpp"
#include "homer/log.hpp"
#include "homer/mask.hpp"
#include "homer/parallel.hpp"
#include "homer/random.hpp"

namespace homer::pipeline {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Chain {
  std::vector<std::size_t> views;     ///< outward order, source excluded
  std::vector<std::size_t> pair_idx;  ///< pair feeding views[i]
};

std::vector<Chain> chains_of(const std::vector<PairEstimate>& pairs) {
  Chain fwd, bwd;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    Chain& c = pairs[i].pair.to > pairs[i].pair.from ? fwd : bwd;
    c.views.push_back(pairs[i].pair.to);
    c.pair_idx.push_back(i);
  }
  std::vector<Chain> out;
  if (!fwd.views.empty()) out.push_back(std::move(fwd));
  if (!bwd.views.empty()) out.push_back(std::move(bwd));
  return out;
}

// Direct inpainting of the nonempty masks in the interaction's mode.
RgbImage inpaint_direct(const RgbImage& image, const std::vector<BinaryMask>& masks, prompts::InpaintMode mode,
                        oracles::Inpainter& inpainter, int& calls) {
  std::vector<BinaryMask> nonempty;
  for (const auto& m : masks) {
    if (!m.empty()) nonempty.push_back(m);
  }
  if (nonempty.empty()) return image;
  if (mode == prompts::InpaintMode::merged) {
    ++calls;
    return prompts::inpaint_merged(image, nonempty, inpainter);
  }
  calls += static_cast<int>(nonempty.size());
  return prompts::inpaint_sequential(image, nonempty, inpainter);
}

class ProgressCounter {
 public:
  ProgressCounter(const ProgressFn& fn, std::string stage, std::size_t total)
      : fn_(fn), stage_(std::move(stage)), total_(total) {
    report(0);
  }
  void tick() { report(++done_); }

 private:
  void report(std::size_t done) {
    if (fn_) fn_(Progress{stage_, done, total_});
  }
  const ProgressFn& fn_;
  std::string stage_;
  std::size_t total_;
  std::atomic<std::size_t> done_{0};
};

}  // namespace

void validate(const ViewSet& vs) {
  if (vs.views.size() < 2) {
    fail(ErrorCode::invalid_view_set, "a view set needs at least 2 views, got " + std::to_string(vs.views.size()));
  }
  const Size s = vs.views.front().size();
  if (s.width <= 0 || s.height <= 0) fail(ErrorCode::invalid_view_set, "views must be nonempty");
  for (std::size_t j = 1; j < vs.views.size(); ++j) {
    if (vs.views[j].size() != s) {
      fail(ErrorCode::invalid_view_set, "view " + std::to_string(j) + " differs in size from view 0");
    }
  }
  if (vs.source_index >= vs.views.size()) fail(ErrorCode::invalid_view_set, "source_index out of range");
  if (!vs.poses.empty() && vs.poses.size() != vs.views.size()) {
    fail(ErrorCode::invalid_view_set, "poses must be absent or given for every view");
  }
}

void validate(const PipelineConfig& cfg) {
  if (cfg.key_view_interval && *cfg.key_view_interval < 1) {
    fail(ErrorCode::invalid_argument, "key_view_interval must be >= 1");
  }
  geometry::validate(cfg.ransac);
  refine::validate(cfg.anchor);
  if (!(cfg.min_pair_similarity >= 0.0 && cfg.min_pair_similarity <= 1.0)) {
    fail(ErrorCode::invalid_argument, "min_pair_similarity must be in [0, 1]");
  }
  if (!(cfg.empty_fill_threshold >= 0.0 && cfg.empty_fill_threshold <= 1.0)) {
    fail(ErrorCode::invalid_argument, "empty_fill_threshold must be in [0, 1]");
  }
}

std::string to_string(Provenance p) {
  switch (p) {
    case Provenance::source: return "source";
    case Provenance::warped: return "warped";
    case Provenance::key_view: return "key_view";
    case Provenance::degraded: return "degraded";
  }
  return "degraded";
}

std::vector<oracles::ViewPair> plan_pairs(std::size_t view_count, std::size_t source_index) {
  if (source_index >= view_count) fail(ErrorCode::invalid_view_set, "source_index out of range");
  std::vector<oracles::ViewPair> out;
  for (std::size_t j = source_index; j + 1 < view_count; ++j) out.push_back({j, j + 1});
  for (std::size_t j = source_index; j > 0; --j) out.push_back({j, j - 1});
  return out;
}

BinaryMask ViewResult::mask_union() const {
  if (objects.empty()) return BinaryMask(inpainted.size());
  std::vector<BinaryMask> masks;
  for (const auto& o : objects) masks.push_back(o.mask);
  return mask::unite_all(masks, objects.front().mask.size());
}

bool PropagationResult::any_degraded() const { return !degraded_views().empty(); }

std::vector<std::size_t> PropagationResult::degraded_views() const {
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < views.size(); ++j) {
    if (views[j].provenance == Provenance::degraded) out.push_back(j);
  }
  return out;
}

std::vector<PairEstimate> estimate_all(const ViewSet& vs, oracles::Matcher& matcher, const PipelineConfig& cfg) {
  validate(vs);
  const auto planned = plan_pairs(vs.views.size(), vs.source_index);
  std::vector<PairEstimate> out(planned.size());
  const unsigned threads = matcher.concurrent_safe() ? cfg.threads : 1;
  parallel_for(planned.size(), threads, [&](std::size_t i) {
    PairEstimate& pe = out[i];
    pe.pair = planned[i];
    try {
      const auto m = matcher.match(vs.views[pe.pair.from], vs.views[pe.pair.to], pe.pair);
      pe.similarity = m.similarity;
      pe.correspondences = m.correspondences.size();
      if (m.similarity < cfg.min_pair_similarity) {
        pe.error = "similarity " + std::to_string(m.similarity) + " below min_pair_similarity";
        return;
      }
      geometry::RansacConfig rc = cfg.ransac;
      rc.rng_seed = mix_seed(cfg.ransac.rng_seed, pe.pair.from * 0x100000001ULL + pe.pair.to);
      pe.ransac = geometry::ransac_estimate(m.correspondences, rc);
      pe.homography = pe.ransac->homography;
      pe.reliable = true;
    } catch (const Error& e) {
      pe.error = std::string(homer::to_string(e.code())) + ": " + e.what();
    }
  });
  bool source_ok = false;
  for (const auto& pe : out) {
    if (!pe.reliable) {
      log::warn("pair " + std::to_string(pe.pair.from) + "->" + std::to_string(pe.pair.to) +
                " unreliable: " + pe.error);
    }
    if (pe.pair.from == vs.source_index && pe.reliable) source_ok = true;
  }
  if (!source_ok) {
    fail(ErrorCode::pipeline_abort, "the source view " + std::to_string(vs.source_index) + " has no reliable neighbour");
  }
  return out;
}

void propagate_masks(const ViewSet& vs, const std::vector<PairEstimate>& pairs, oracles::Segmenter& segmenter,
                     const PipelineConfig& cfg, PropagationResult& result, const ProgressFn& progress) {
  const Size size = vs.size();
  const auto chains = chains_of(pairs);
  const std::size_t k_objects = result.views.at(result.source_index).objects.size();
  ProgressCounter counter(progress, "masks", vs.views.size() - 1);
  const unsigned threads = segmenter.concurrent_safe() ? cfg.threads : 1;
  parallel_for(chains.size(), threads, [&](std::size_t c) {
    const Chain& chain = chains[c];
    std::size_t prev = result.source_index;
    for (std::size_t i = 0; i < chain.views.size(); ++i) {
      const std::size_t j = chain.views[i];
      const auto& hop = pairs[chain.pair_idx[i]].homography;
      ViewResult& view = result.views[j];
      view.objects.resize(k_objects);
      for (std::size_t k = 0; k < k_objects; ++k) {
        ObjectResult& obj = view.objects[k];
        BinaryMask coarse = geometry::warp_mask(result.views[prev].objects[k].mask, hop, size);
        if (cfg.refine_enabled && !coarse.empty()) {
          try {
            auto r = refine::refine_mask(vs.views[j], coarse, {}, segmenter, cfg.anchor);
            obj.mask = std::move(r.refined_mask);
            obj.loss = r.loss;
            obj.best_candidate_loss = r.best_candidate_loss;
            obj.radius = r.radius;
            obj.candidates = r.candidates_evaluated;
            obj.degraded = r.degraded;
            obj.refined = !r.degraded;
            if (r.degraded) {
              obj.error = "best anchor loss " + std::to_string(r.best_candidate_loss) + " above rejection threshold";
            }
          } catch (const Error& e) {
            obj.mask = coarse;
            obj.loss = refine::refinement_loss(coarse, coarse, cfg.anchor);
            obj.degraded = true;
            obj.error = std::string(homer::to_string(e.code())) + ": " + e.what();
          }
        } else {
          obj.mask = coarse;
          obj.loss = refine::refinement_loss(coarse, coarse, cfg.anchor);
        }
        if (obj.degraded) {
          view.mask_degraded = true;
          view.warnings.push_back("object " + std::to_string(k + 1) + ": " + obj.error);
        }
        if (cfg.keep_coarse_masks) obj.coarse = std::move(coarse);
      }
      prev = j;
      counter.tick();
    }
  });
}

void propagate_inpaint(const ViewSet& vs, const std::vector<PairEstimate>& pairs, oracles::Inpainter& inpainter,
                       const PipelineConfig& cfg, PropagationResult& result, const ProgressFn& progress) {
  const Size size = vs.size();
  const auto chains = chains_of(pairs);
  ProgressCounter counter(progress, "inpaint", vs.views.size() - 1);
  const unsigned threads = inpainter.concurrent_safe() ? cfg.threads : 1;
  parallel_for(chains.size(), threads, [&](std::size_t c) {
    const Chain& chain = chains[c];
    std::size_t prev = result.source_index;
    for (std::size_t i = 0; i < chain.views.size(); ++i) {
      const std::size_t j = chain.views[i];
      const auto& hop = pairs[chain.pair_idx[i]].homography;
      ViewResult& view = result.views[j];
      const RgbImage& original = vs.views[j];
      std::vector<BinaryMask> masks;
      for (const auto& o : view.objects) masks.push_back(o.mask);
      const BinaryMask all = mask::unite_all(masks, size);
      view.key_view = cfg.key_view_interval && view.distance % static_cast<std::size_t>(*cfg.key_view_interval) == 0;

      auto direct_or_keep = [&](const std::string& why) {
        try {
          view.inpainted = inpaint_direct(original, masks, result.mode, inpainter, view.inpainter_calls);
        } catch (const Error& e) {
          view.inpainted = original;
          view.inpaint_degraded = true;
          view.warnings.push_back(why + "; direct inpainting failed too: " + e.what());
        }
      };

      if (all.empty()) {
        view.inpainted = original;
      } else if (view.key_view) {
        direct_or_keep("key view");
      } else if (result.views[prev].inpaint_degraded) {
        view.warnings.push_back("previous view kept its original pixels; inpainting directly");
        direct_or_keep("previous view kept its original pixels");
      } else {
        try {
          const auto warped = geometry::warp_image(result.views[prev].inpainted, hop, size);
          RgbImage composite = original;
          const auto in_all = all.bits();
          const auto valid = warped.validity.bits();
          for (int y = 0; y < size.height; ++y) {
            for (int x = 0; x < size.width; ++x) {
              const std::size_t idx = static_cast<std::size_t>(y) * size.width + x;
              if (in_all[idx] && valid[idx]) composite.set(x, y, warped.image.at(x, y));
            }
          }
          for (std::size_t k = 0; k < masks.size(); ++k) {
            if (masks[k].empty()) continue;
            const BinaryMask empty = mask::subtract(masks[k], warped.validity);
            const double ratio = static_cast<double>(empty.area()) / static_cast<double>(masks[k].area());
            if (ratio > cfg.empty_fill_threshold) {
              ++view.inpainter_calls;
              composite = inpainter.inpaint(composite, masks[k]);
            } else if (!empty.empty()) {
              ++view.inpainter_calls;
              composite = inpainter.inpaint(composite, empty);
            }
          }
          view.inpainted = std::move(composite);
        } catch (const Error& e) {
          view.warnings.push_back(std::string("warped fill failed: ") + e.what());
          direct_or_keep("warped fill failed");
        }
      }
      prev = j;
      counter.tick();
    }
  });
}

PropagationResult run(const ViewSet& vs_in, const prompts::PromptSet& prompt_set,
                      const oracles::OracleSet& oracle_set, const PipelineConfig& cfg, const ProgressFn& progress) {
  const auto t_start = Clock::now();
  validate(vs_in);
  validate(cfg);
  if (!oracle_set.matcher || !oracle_set.segmenter || !oracle_set.inpainter) {
    fail(ErrorCode::invalid_argument, "oracle set is incomplete");
  }
  if (prompt_set.view_index >= vs_in.views.size()) {
    fail(ErrorCode::invalid_prompt, "prompts reference view " + std::to_string(prompt_set.view_index) + " but the set has " +
                                        std::to_string(vs_in.views.size()) + " views");
  }
  const ViewSet* vs = &vs_in;
  ViewSet rebased;
  if (vs_in.source_index != prompt_set.view_index) {
    rebased = vs_in;
    rebased.source_index = prompt_set.view_index;
    vs = &rebased;
  }
  const std::size_t source = vs->source_index;

  auto matcher = oracles::serialized(oracle_set.matcher);
  auto segmenter = oracles::serialized(std::shared_ptr<oracles::Segmenter>(
      std::make_shared<oracles::CheckedSegmenter>(oracle_set.segmenter)));
  auto inpainter = oracles::serialized(std::shared_ptr<oracles::Inpainter>(
      std::make_shared<oracles::CheckedInpainter>(oracle_set.inpainter)));

  PropagationResult result;
  result.source_index = source;
  result.views.resize(vs->views.size());

  if (progress) progress({"interaction", 0, 1});
  auto t0 = Clock::now();
  auto interaction = prompts::interact(vs->views[source], prompt_set, *segmenter, *inpainter, cfg.inpaint_mode);
  result.mode = interaction.mode;
  {
    ViewResult& sv = result.views[source];
    sv.provenance = Provenance::source;
    sv.inpainted = std::move(interaction.inpainted_source);
    sv.inpainter_calls = interaction.mode == prompts::InpaintMode::merged ? 1 : static_cast<int>(interaction.masks.size());
    for (auto& m : interaction.masks) {
      ObjectResult o;
      o.mask = std::move(m);
      if (cfg.keep_coarse_masks) o.coarse = o.mask;
      sv.objects.push_back(std::move(o));
    }
  }
  result.timings.interaction_s = seconds_since(t0);
  if (progress) progress({"interaction", 1, 1});

  t0 = Clock::now();
  if (progress) progress({"estimation", 0, vs->views.size() - 1});
  result.pairs = estimate_all(*vs, *matcher, cfg);
  result.timings.estimation_s = seconds_since(t0);
  if (progress) progress({"estimation", vs->views.size() - 1, vs->views.size() - 1});

  for (const auto& chain : chains_of(result.pairs)) {
    bool degraded = false;
    for (std::size_t i = 0; i < chain.views.size(); ++i) {
      const auto& pe = result.pairs[chain.pair_idx[i]];
      ViewResult& v = result.views[chain.views[i]];
      v.distance = i + 1;
      if (!pe.reliable) {
        degraded = true;
        v.warnings.push_back("pair " + std::to_string(pe.pair.from) + "->" + std::to_string(pe.pair.to) +
                             " unreliable (" + pe.error + "); identity hop used");
      }
      v.chain_degraded = degraded;
    }
  }

  t0 = Clock::now();
  propagate_masks(*vs, result.pairs, *segmenter, cfg, result, progress);
  result.timings.masks_s = seconds_since(t0);

  t0 = Clock::now();
  propagate_inpaint(*vs, result.pairs, *inpainter, cfg, result, progress);
  result.timings.inpaint_s = seconds_since(t0);

  for (std::size_t j = 0; j < result.views.size(); ++j) {
    ViewResult& v = result.views[j];
    if (j == source) continue;
    if (v.chain_degraded || v.mask_degraded || v.inpaint_degraded) v.provenance = Provenance::degraded;
    else if (v.key_view) v.provenance = Provenance::key_view;
    else v.provenance = Provenance::warped;
  }
  result.timings.total_s = seconds_since(t_start);
  return result;
}

}  // namespace homer::pipeline

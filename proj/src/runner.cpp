#include "loralab/runner.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "loralab/kernels.hpp"
#include "loralab/rng.hpp"

namespace loralab::runner {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

void TrialConfig::validate() const {
  model.validate();
  optimizer.validate();
  if (steps < 1) throw std::invalid_argument("trial: steps must be >= 1");
  if (record_every < 1 || record_every > steps)
    throw std::invalid_argument("trial: record_every must be in [1, steps]");
  if (!batch.full && batch.size < 1)
    throw std::invalid_argument("trial: minibatch size must be >= 1");
  if (!(divergence_factor > 1.0))
    throw std::invalid_argument("trial: divergence_factor must be > 1");
}

void SweepGrid::validate() const {
  if (widths.empty() || lrs.empty() || schemes.empty())
    throw std::invalid_argument("sweep: grid axes must be nonempty");
  if (num_seeds < 1) throw std::invalid_argument("sweep: num_seeds must be >= 1");
  for (std::size_t i = 1; i < widths.size(); ++i)
    if (widths[i] <= widths[i - 1])
      throw std::invalid_argument("sweep: widths must be strictly ascending");
  for (std::size_t i = 1; i < lrs.size(); ++i)
    if (lrs[i] <= lrs[i - 1])
      throw std::invalid_argument("sweep: lrs must be strictly ascending");
  for (const double lr : lrs)
    if (!(lr >= 0.0) || !std::isfinite(lr))
      throw std::invalid_argument("sweep: lrs must be finite and >= 0");
}

std::uint64_t trial_stream_seed(std::uint64_t base, int width, int lr_index,
                                gamma::InitScheme scheme, int seed_index) {
  return rng::mix({base, static_cast<std::uint64_t>(width), static_cast<std::uint64_t>(lr_index),
                   scheme == gamma::InitScheme::A ? 1ULL : 2ULL,
                   static_cast<std::uint64_t>(seed_index), 0x7261696cULL});
}

std::uint64_t student_init_seed(std::uint64_t base, int width, int seed_index) {
  return rng::mix({base, static_cast<std::uint64_t>(width),
                   static_cast<std::uint64_t>(seed_index), 0x696e6974ULL});
}

namespace {

/// Per-(width, student_seed) frozen forward caches: u = phi(W_in x) and
/// hg = W_in x + W_h u for the train and test inputs. Everything downstream
/// of these is LoRA-only, so the n x n frozen matrix never has to be stored.
struct FrozenCache {
  Matrix u_train, hg_train;
  Matrix u_test, hg_test;
};

void build_frozen_part(const model::StudentState& skeleton, const Matrix& inputs, Matrix& u_out,
                       Matrix& hg_out) {
  const int n = skeleton.cfg.n;
  const int d = skeleton.cfg.d;
  const int count = inputs.rows;
  u_out = Matrix(count, n);
  hg_out = Matrix(count, n);
  for (int s = 0; s < count; ++s) {
    const double* x = inputs.row(s);
    double* hg = hg_out.row(s);
    for (int j = 0; j < n; ++j) hg[j] = kernels::dot(skeleton.w_in.row(j), x, d);
    kernels::relu(hg, u_out.row(s), n);
  }
  // W_h is streamed in row blocks and added in place: hg[s][j] = h + dot(row_j, u_s).
  constexpr int kBlock = 64;
  std::vector<double> rows(static_cast<std::size_t>(kBlock) * n);
  for (int j0 = 0; j0 < n; j0 += kBlock) {
    const int jb = std::min(kBlock, n - j0);
    for (int k = 0; k < jb; ++k)
      model::w_h_row_fill(skeleton.seed, n, j0 + k, rows.data() + static_cast<std::size_t>(k) * n);
    for (int s = 0; s < count; ++s) {
      const double* u = u_out.row(s);
      double* hg = hg_out.row(s);
      for (int k = 0; k < jb; ++k)
        hg[j0 + k] = hg[j0 + k] + kernels::dot(rows.data() + static_cast<std::size_t>(k) * n, u, n);
    }
  }
}

std::shared_ptr<const FrozenCache> build_frozen(const model::ModelConfig& cfg,
                                                std::uint64_t student_seed, const Matrix& train,
                                                const Matrix& test) {
  // Scheme is irrelevant here: only the frozen backbone is touched.
  const auto skeleton =
      model::init_student(cfg, gamma::InitScheme::A, student_seed, /*materialize_w_h=*/false);
  auto cache = std::make_shared<FrozenCache>();
  build_frozen_part(skeleton, train, cache->u_train, cache->hg_train);
  build_frozen_part(skeleton, test, cache->u_test, cache->hg_test);
  return cache;
}

class CacheStore {
 public:
  CacheStore(const Matrix* train, const Matrix* test) : train_(train), test_(test) {}

  void plan_use(int width, std::uint64_t seed) {
    std::lock_guard lock(mu_);
    auto& entry = entries_[{width, seed}];
    if (!entry) entry = std::make_unique<Entry>();
    entry->remaining += 1;
  }

  std::shared_ptr<const FrozenCache> acquire(const model::ModelConfig& cfg,
                                             std::uint64_t seed) {
    Entry* entry = find(cfg.n, seed);
    std::lock_guard lock(entry->mu);
    if (!entry->cache) entry->cache = build_frozen(cfg, seed, *train_, *test_);
    return entry->cache;
  }

  void release(int width, std::uint64_t seed) {
    Entry* entry = find(width, seed);
    std::lock_guard lock(entry->mu);
    if (--entry->remaining == 0) entry->cache.reset();
  }

 private:
  struct Entry {
    std::mutex mu;
    int remaining = 0;
    std::shared_ptr<const FrozenCache> cache;
  };

  Entry* find(int width, std::uint64_t seed) {
    std::lock_guard lock(mu_);
    return entries_.at({width, seed}).get();
  }

  const Matrix* train_;
  const Matrix* test_;
  std::mutex mu_;
  std::map<std::pair<int, std::uint64_t>, std::unique_ptr<Entry>> entries_;
};

void run_tasks(int threads, std::size_t count, const std::function<void(std::size_t)>& fn) {
  if (threads <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::mutex err_mu;
  std::exception_ptr error;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(err_mu);
        if (!error) error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  const int n_workers = std::min<std::size_t>(static_cast<std::size_t>(threads), count);
  pool.reserve(n_workers);
  for (int t = 0; t < n_workers; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

/// The training loop. Per sample everything stays in cache: the only
/// streamed arrays are the frozen u/hg rows.
TrialRecord execute_trial(const TrialConfig& cfg, const model::Dataset& train,
                          const model::Dataset& test,
                          std::shared_ptr<const FrozenCache> frozen) {
  cfg.validate();
  if (train.inputs.cols != cfg.model.d || test.inputs.cols != cfg.model.d)
    throw std::invalid_argument("run_trial: dataset dimension != model d");
  if (!frozen) frozen = build_frozen(cfg.model, cfg.student_seed, train.inputs, test.inputs);

  auto student =
      model::init_student(cfg.model, cfg.scheme, cfg.student_seed, /*materialize_w_h=*/false);
  const int n = cfg.model.n;
  const int r = cfg.model.r;
  const int train_count = train.size();
  const double scale = cfg.model.scale();
  const double* w_out = student.w_out.row(0);

  auto opt_state = optim::OptimizerState::for_student(student, cfg.optimizer);

  std::vector<int> schedule;
  for (int k = 0; k <= cfg.steps; ++k)
    if (k % cfg.record_every == 0 || k == cfg.steps) schedule.push_back(k);

  TrialRecord rec;
  rec.config = cfg;
  rec.width = cfg.model.n;
  rec.lr = cfg.optimizer.lr;
  rec.steps_recorded = schedule;
  const std::size_t slots = schedule.size();
  rec.train_loss.reserve(slots);
  rec.test_loss.reserve(slots);
  rec.mean_za.reserve(slots);
  rec.mean_zb.reserve(slots);

  Matrix da(r, n), dbt(r, n);
  std::vector<double> za(r), q(r), zb(n), v(n), dyh(n);
  std::vector<int> batch_indices;
  rng::GaussianStream batch_stream(rng::mix({cfg.seed, 0x62617463ULL}));

  // Forward for one cached sample; za/zb/v are left for the caller.
  auto sample_forward = [&](int idx, const Matrix& u_cache, const Matrix& hg_cache) -> double {
    const double* u = u_cache.row(idx);
    for (int i = 0; i < r; ++i) za[i] = kernels::dot(student.a.row(i), u, n);
    std::fill(zb.begin(), zb.end(), 0.0);
    for (int i = 0; i < r; ++i) kernels::axpy(scale * za[i], student.bt.row(i), zb.data(), n);
    return kernels::add_relu_dot(hg_cache.row(idx), zb.data(), w_out, v.data(), n);
  };

  struct Metrics {
    double loss = 0.0, mean_za = 0.0, mean_zb = 0.0;
  };
  auto dataset_metrics = [&](const Matrix& u_cache, const Matrix& hg_cache,
                             const std::vector<double>& targets, bool with_norms) -> Metrics {
    Metrics m;
    const int count = u_cache.rows;
    for (int s = 0; s < count; ++s) {
      const double y = sample_forward(s, u_cache, hg_cache);
      const double e = y - targets[s];
      m.loss += e * e;
      if (with_norms) {
        m.mean_za += std::sqrt(kernels::sum_sq(za.data(), r));
        m.mean_zb += std::sqrt(kernels::sum_sq(zb.data(), n));
      }
    }
    const double count_d = static_cast<double>(count);
    m.loss /= count_d;
    m.mean_za /= count_d;
    m.mean_zb /= count_d;
    return m;
  };

  double loss0 = 0.0;
  auto fill_divergence_tail = [&] {
    while (rec.train_loss.size() < slots) {
      rec.train_loss.push_back(kInf);
      rec.test_loss.push_back(kInf);
      rec.mean_za.push_back(kInf);
      rec.mean_zb.push_back(kInf);
    }
    rec.final_train_loss = kInf;
    rec.final_test_loss = kInf;
  };

  for (int k = 0; k <= cfg.steps; ++k) {
    const bool record_now = (k % cfg.record_every == 0) || k == cfg.steps;
    const bool do_backward = k < cfg.steps;

    // Batch for this step.
    int batch_size = train_count;
    const int* batch = nullptr;
    if (!cfg.batch.full && do_backward) {
      batch_size = std::min(cfg.batch.size, train_count);
      batch_indices.resize(batch_size);
      for (int j = 0; j < batch_size; ++j)
        batch_indices[j] = static_cast<int>(
            batch_stream.uniform_index(static_cast<std::uint64_t>(train_count)));
      batch = batch_indices.data();
    }

    double step_loss = 0.0;
    double za_acc = 0.0, zb_acc = 0.0;
    Metrics final_m;
    const bool norms_in_pass = record_now && cfg.batch.full;
    if (do_backward) {
      std::fill(da.data.begin(), da.data.end(), 0.0);
      std::fill(dbt.data.begin(), dbt.data.end(), 0.0);
      const double batch_d = static_cast<double>(batch_size);
      for (int b = 0; b < batch_size; ++b) {
        const int idx = batch ? batch[b] : b;
        const double y = sample_forward(idx, frozen->u_train, frozen->hg_train);
        const double e = y - train.targets[idx];
        step_loss += e * e;
        if (norms_in_pass) {
          za_acc += std::sqrt(kernels::sum_sq(za.data(), r));
          zb_acc += std::sqrt(kernels::sum_sq(zb.data(), n));
        }
        const double dy = (2.0 * e) / batch_d;
        kernels::masked_grad(dy, w_out, v.data(), dyh.data(), n);
        const double* u = frozen->u_train.row(idx);
        for (int i = 0; i < r; ++i) {
          const double qi = kernels::dot(dyh.data(), student.bt.row(i), n);
          kernels::axpy(scale * qi, u, da.row(i), n);
        }
        for (int i = 0; i < r; ++i) kernels::axpy(scale * za[i], dyh.data(), dbt.row(i), n);
      }
      step_loss /= static_cast<double>(batch_size);
    } else {
      final_m = dataset_metrics(frozen->u_train, frozen->hg_train, train.targets, true);
      step_loss = final_m.loss;
    }

    if (k == 0) loss0 = step_loss;
    const double threshold = loss0 > 0.0 ? cfg.divergence_factor * loss0 : cfg.divergence_factor;
    if (!std::isfinite(step_loss) || step_loss > threshold) {
      rec.diverged = true;
      rec.diverged_at = k;
      fill_divergence_tail();
      break;
    }

    if (record_now) {
      Metrics train_m;
      if (!do_backward) {
        train_m = final_m;
      } else if (cfg.batch.full) {
        train_m.loss = step_loss;
        train_m.mean_za = za_acc / static_cast<double>(train_count);
        train_m.mean_zb = zb_acc / static_cast<double>(train_count);
      } else {
        train_m = dataset_metrics(frozen->u_train, frozen->hg_train, train.targets, true);
      }
      const Metrics test_m = dataset_metrics(frozen->u_test, frozen->hg_test, test.targets, false);
      rec.train_loss.push_back(train_m.loss);
      rec.test_loss.push_back(test_m.loss);
      rec.mean_za.push_back(train_m.mean_za);
      rec.mean_zb.push_back(train_m.mean_zb);
      if (!do_backward) {
        rec.final_train_loss = train_m.loss;
        rec.final_test_loss = test_m.loss;
      }
    }

    if (do_backward) {
      model::Grads grads;  // thin view over the accumulators
      grads.da = std::move(da);
      grads.dbt = std::move(dbt);
      optim::step(student, grads, opt_state, cfg.optimizer);
      da = std::move(grads.da);
      dbt = std::move(grads.dbt);
    }
  }

  return rec;
}

struct TrialSpec {
  int width = 0;
  double lr = 0.0;
  int lr_index = 0;
  gamma::InitScheme scheme = gamma::InitScheme::A;
  int seed_index = 0;
};

SweepResult execute_specs(std::vector<TrialSpec> specs, const SweepGrid& grid,
                          const TrialConfig& base, const model::Dataset& train,
                          const model::Dataset& test, int threads) {
  SweepResult result;
  result.grid = grid;
  result.base_seed = base.seed;
  result.records.resize(specs.size());

  CacheStore store(&train.inputs, &test.inputs);
  for (const auto& spec : specs)
    store.plan_use(spec.width, student_init_seed(base.seed, spec.width, spec.seed_index));

  run_tasks(threads, specs.size(), [&](std::size_t i) {
    const TrialSpec& spec = specs[i];
    TrialConfig cfg = base;
    cfg.model.n = spec.width;
    cfg.scheme = spec.scheme;
    cfg.optimizer.lr = spec.lr;
    cfg.seed = trial_stream_seed(base.seed, spec.width, spec.lr_index, spec.scheme,
                                 spec.seed_index);
    cfg.student_seed = student_init_seed(base.seed, spec.width, spec.seed_index);
    auto frozen = store.acquire(cfg.model, cfg.student_seed);
    TrialRecord rec = execute_trial(cfg, train, test, std::move(frozen));
    store.release(spec.width, cfg.student_seed);
    rec.lr_index = spec.lr_index;
    rec.seed_index = spec.seed_index;
    result.records[i] = std::move(rec);
  });

  // Canonical record order, independent of execution grouping.
  std::sort(result.records.begin(), result.records.end(),
            [](const TrialRecord& a, const TrialRecord& b) {
              if (a.width != b.width) return a.width < b.width;
              if (a.config.scheme != b.config.scheme)
                return a.config.scheme == gamma::InitScheme::A;
              if (a.lr_index != b.lr_index) return a.lr_index < b.lr_index;
              return a.seed_index < b.seed_index;
            });

  for (const int width : grid.widths)
    for (const auto scheme : grid.schemes)
      result.optima.push_back(select_optimal_lr(result, width, scheme));
  return result;
}

}  // namespace

TrialRecord run_trial(const TrialConfig& cfg, const model::Dataset& train,
                      const model::Dataset& test) {
  return execute_trial(cfg, train, test, nullptr);
}

SweepResult run_sweep(const SweepGrid& grid, const TrialConfig& base,
                      const model::Dataset& train, const model::Dataset& test, int threads) {
  grid.validate();
  std::vector<TrialSpec> specs;
  specs.reserve(grid.widths.size() * grid.lrs.size() * grid.schemes.size() *
                static_cast<std::size_t>(grid.num_seeds));
  // Grouped by (width, seed) so concurrent trials share frozen caches.
  for (const int width : grid.widths)
    for (int seed_index = 0; seed_index < grid.num_seeds; ++seed_index)
      for (const auto scheme : grid.schemes)
        for (std::size_t li = 0; li < grid.lrs.size(); ++li)
          specs.push_back({width, grid.lrs[li], static_cast<int>(li), scheme, seed_index});
  return execute_specs(std::move(specs), grid, base, train, test, threads);
}

SweepResult run_lr_rule_series(std::span<const int> widths, gamma::InitScheme scheme,
                               double coeff, double exponent, int num_seeds,
                               const TrialConfig& base, const model::Dataset& train,
                               const model::Dataset& test, int threads) {
  if (widths.size() < 2) throw std::invalid_argument("lr_rule_series: need >= 2 widths");
  if (num_seeds < 1) throw std::invalid_argument("lr_rule_series: need >= 1 seed");
  SweepGrid grid;
  grid.widths.assign(widths.begin(), widths.end());
  grid.schemes = {scheme};
  grid.num_seeds = num_seeds;
  std::vector<TrialSpec> specs;
  for (const int width : widths) {
    const double lr = coeff * std::pow(static_cast<double>(width), exponent);
    grid.lrs.push_back(lr);
    for (int seed_index = 0; seed_index < num_seeds; ++seed_index)
      specs.push_back({width, lr, 0, scheme, seed_index});
  }
  std::sort(grid.lrs.begin(), grid.lrs.end());
  grid.lrs.erase(std::unique(grid.lrs.begin(), grid.lrs.end()), grid.lrs.end());
  // Remap lr_index onto the sorted union so records stay self-consistent.
  for (auto& spec : specs) {
    const auto it = std::find(grid.lrs.begin(), grid.lrs.end(), spec.lr);
    spec.lr_index = static_cast<int>(it - grid.lrs.begin());
  }
  grid.validate();
  return execute_specs(std::move(specs), grid, base, train, test, threads);
}

OptimalLr select_optimal_lr(const SweepResult& result, int width, gamma::InitScheme scheme) {
  OptimalLr best;
  best.width = width;
  best.scheme = scheme;
  for (std::size_t li = 0; li < result.grid.lrs.size(); ++li) {
    double loss_sum = 0.0;
    int count = 0;
    bool eligible = true;
    for (const auto& rec : result.records) {
      if (rec.width != width || rec.config.scheme != scheme ||
          rec.lr_index != static_cast<int>(li))
        continue;
      if (rec.diverged) {
        eligible = false;
        break;
      }
      loss_sum += rec.final_train_loss;
      ++count;
    }
    if (!eligible || count == 0) continue;
    const double mean_loss = loss_sum / count;
    if (!best.resolved || mean_loss < best.mean_final_train_loss) {
      best.resolved = true;
      best.lr_index = static_cast<int>(li);
      best.lr = result.grid.lrs[li];
      best.mean_final_train_loss = mean_loss;
    }
  }
  return best;
}

SweepResult merge_sweeps(const std::vector<SweepResult>& parts) {
  if (parts.empty()) throw std::invalid_argument("merge_sweeps: nothing to merge");
  SweepResult merged;
  merged.base_seed = parts.front().base_seed;
  for (const auto& part : parts) {
    if (part.base_seed != merged.base_seed)
      throw std::invalid_argument("merge_sweeps: parts have different base seeds");
    for (const int w : part.grid.widths) merged.grid.widths.push_back(w);
    for (const double lr : part.grid.lrs) merged.grid.lrs.push_back(lr);
    for (const auto s : part.grid.schemes)
      if (std::find(merged.grid.schemes.begin(), merged.grid.schemes.end(), s) ==
          merged.grid.schemes.end())
        merged.grid.schemes.push_back(s);
    merged.grid.num_seeds = std::max(merged.grid.num_seeds, part.grid.num_seeds);
    for (const auto& rec : part.records) merged.records.push_back(rec);
  }
  auto dedup_sort = [](auto& v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
  };
  dedup_sort(merged.grid.widths);
  dedup_sort(merged.grid.lrs);
  std::sort(merged.grid.schemes.begin(), merged.grid.schemes.end(),
            [](gamma::InitScheme a, gamma::InitScheme b) {
              return a == gamma::InitScheme::A && b == gamma::InitScheme::B;
            });
  for (auto& rec : merged.records) {
    const auto it = std::find(merged.grid.lrs.begin(), merged.grid.lrs.end(), rec.lr);
    rec.lr_index = static_cast<int>(it - merged.grid.lrs.begin());
  }
  std::sort(merged.records.begin(), merged.records.end(),
            [](const TrialRecord& a, const TrialRecord& b) {
              if (a.width != b.width) return a.width < b.width;
              if (a.config.scheme != b.config.scheme)
                return a.config.scheme == gamma::InitScheme::A;
              if (a.lr_index != b.lr_index) return a.lr_index < b.lr_index;
              return a.seed_index < b.seed_index;
            });
  for (const int width : merged.grid.widths)
    for (const auto scheme : merged.grid.schemes)
      merged.optima.push_back(select_optimal_lr(merged, width, scheme));
  return merged;
}

const TrialRecord* find_record(const SweepResult& result, int width, gamma::InitScheme scheme,
                               int lr_index, int seed_index) {
  for (const auto& rec : result.records)
    if (rec.width == width && rec.config.scheme == scheme && rec.lr_index == lr_index &&
        rec.seed_index == seed_index)
      return &rec;
  return nullptr;
}

}  // namespace loralab::runner

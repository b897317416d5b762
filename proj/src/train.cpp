#include "heat/train.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <limits>
#include <numeric>
#include <optional>
#include <thread>

#include "heat/errors.hpp"
#include "heat/metrics.hpp"

namespace heat {

void TrainConfig::validate() const {
  if (!(learning_rate >= 0) || !(weight_decay >= 0)) throw ConfigError("train: lr and weight decay must be >= 0");
  if (max_epochs < 0) throw ConfigError("train: max_epochs must be >= 0");
  if (batch_size < 1) throw ConfigError("train: batch_size must be positive");
  if (patience < 0) throw ConfigError("train: patience must be >= 0");
  if (max_epochs > 0 && patience > max_epochs) throw ConfigError("train: patience exceeds max_epochs");
  if (!(dropout >= 0 && dropout < 1)) throw ConfigError("train: dropout must lie in [0, 1)");
  if (folds < 3) throw ConfigError("train: at least 3 folds are needed (train, validation, test)");
  augmentation.validate();
}

AdamConfig TrainConfig::adam() const {
  AdamConfig a;
  a.learning_rate = learning_rate;
  a.weight_decay = weight_decay;
  a.decoupled_weight_decay = decoupled_weight_decay;
  return a;
}

std::vector<Fold> kfold_split(std::size_t n, int folds, std::uint64_t seed) {
  if (folds < 3) throw ConfigError("kfold_split: at least 3 folds are needed");
  if (n < static_cast<std::size_t>(folds)) {
    throw ConfigError("kfold_split: " + std::to_string(n) + " items cannot fill " + std::to_string(folds) + " folds");
  }
  std::vector<std::size_t> ids(n);
  std::iota(ids.begin(), ids.end(), std::size_t{0});
  Rng rng = substream(seed, "folds");
  std::shuffle(ids.begin(), ids.end(), rng);

  std::vector<std::vector<std::size_t>> parts(folds);
  for (std::size_t i = 0; i < n; ++i) parts[i % folds].push_back(ids[i]);
  for (auto& p : parts) std::sort(p.begin(), p.end());

  std::vector<Fold> out(folds);
  for (int f = 0; f < folds; ++f) {
    const int val = (f + 1) % folds;
    out[f].test = parts[f];
    out[f].val = parts[val];
    for (int o = 0; o < folds; ++o) {
      if (o != f && o != val) out[f].train.insert(out[f].train.end(), parts[o].begin(), parts[o].end());
    }
    std::sort(out[f].train.begin(), out[f].train.end());
  }
  return out;
}

void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& f) {
  if (jobs <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  {
    std::vector<std::jthread> workers;
    const std::size_t count = std::min<std::size_t>(static_cast<std::size_t>(jobs), n);
    for (std::size_t w = 0; w < count; ++w) {
      workers.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) {
          try {
            f(i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

namespace {

int require_label(const HeteroGraph& g) {
  if (!g.label()) throw ConfigError("training graph without a label");
  return *g.label();
}

struct Prepared {
  std::vector<GraphTensors> tensors;
  std::vector<int> labels;
};

Prepared prepare(std::span<const HeteroGraph> graphs) {
  Prepared p;
  for (const auto& g : graphs) {
    p.tensors.push_back(GraphTensors::from(g));
    p.labels.push_back(require_label(g));
  }
  return p;
}

Metrics score(const Model& model, const Prepared& data) {
  Metrics m;
  m.count = data.tensors.size();
  if (m.count == 0) {
    m.auc = m.accuracy = m.macro_f1 = m.loss = std::numeric_limits<double>::quiet_NaN();
    return m;
  }
  const int classes = model.config().num_classes;
  Eigen::MatrixXd probs(static_cast<Eigen::Index>(m.count), classes);
  std::vector<int> preds(m.count);
  double loss = 0;
  for (std::size_t i = 0; i < m.count; ++i) {
    Tape tape;
    BoundParams params(tape, model.params(), false);
    Var logits = model.forward(params, data.tensors[i]);
    loss += cross_entropy(logits, data.labels[i]).value()(0, 0);
    const Eigen::RowVectorXd p = class_probabilities(logits.value());
    probs.row(static_cast<Eigen::Index>(i)) = p;
    Eigen::Index arg = 0;
    for (Eigen::Index c = 1; c < p.size(); ++c) {
      if (p[c] > p[arg]) arg = c;
    }
    preds[i] = static_cast<int>(arg);
  }
  m.loss = loss / static_cast<double>(m.count);
  m.accuracy = metric_accuracy(preds, data.labels);
  m.macro_f1 = metric_macro_f1(preds, data.labels, classes);
  try {
    if (classes == 2) {
      std::vector<double> s(m.count);
      for (std::size_t i = 0; i < m.count; ++i) s[i] = probs(static_cast<Eigen::Index>(i), 1);
      m.auc = metric_auc(s, data.labels);
    } else {
      m.auc = metric_auc_ovr(probs, data.labels);
    }
  } catch (const UndefinedMetricError&) {
    m.auc = std::numeric_limits<double>::quiet_NaN();
  }
  return m;
}

Model with_dropout(const Model& m, double dropout) {
  ModelConfig c = m.config();
  c.dropout = dropout;
  return Model(c, m.params());
}

}  // namespace

Metrics evaluate(const Model& model, std::span<const HeteroGraph> graphs) { return score(model, prepare(graphs)); }

TrainResult train(std::span<const HeteroGraph> train_set, std::span<const HeteroGraph> val_set, Model init,
                  const TrainConfig& cfg, int jobs, bool deterministic) {
  cfg.validate();
  if (train_set.empty()) throw ConfigError("train: empty training set");
  for (const auto& g : train_set) require_label(g);
  const Prepared val = prepare(val_set);
  const std::size_t n = train_set.size();

  Model model = with_dropout(init, cfg.dropout);
  AdamState state = AdamState::zeros_like(model.params());
  const AdamConfig adam = cfg.adam();

  auto selection_loss = [&](const Model& m, double train_loss) {
    return val.tensors.empty() ? train_loss : score(m, val).loss;
  };

  double initial_train_loss = 0;
  if (val.tensors.empty()) {
    for (const auto& g : train_set) initial_train_loss += graph_loss(model, GraphTensors::from(g), *g.label());
    initial_train_loss /= static_cast<double>(n);
  }
  TrainResult result{model, 0, selection_loss(model, initial_train_loss), {}, StopReason::kMaxEpochs, {}};

  int stale = 0;
  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle = substream(cfg.seed, "shuffle", static_cast<std::uint64_t>(epoch));
    std::shuffle(order.begin(), order.end(), shuffle);

    double loss_sum = 0;
    std::optional<std::string> failure;
    for (std::size_t b = 0; b < n && !failure; b += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t count = std::min<std::size_t>(static_cast<std::size_t>(cfg.batch_size), n - b);
      std::vector<double> losses(count);
      std::vector<std::vector<Matrix>> grads(count);
      std::vector<std::string> errors(count);
      parallel_for(count, jobs, [&](std::size_t i) {
        const std::size_t idx = order[b + i];
        const std::uint64_t key = static_cast<std::uint64_t>(epoch) * 1000003ULL + idx;
        try {
          Rng aug = substream(cfg.seed, "augment", key);
          Rng drop = substream(cfg.seed, "dropout", key);
          const HeteroGraph g = augment(train_set[idx], cfg.augmentation, aug);
          const GraphTensors gt = GraphTensors::from(g);
          Tape tape;
          BoundParams params(tape, model.params());
          Var loss = cross_entropy(model.forward(params, gt, Mode::kTrain, &drop), *g.label());
          tape.backward(loss);
          losses[i] = loss.value()(0, 0);
          grads[i] = params.grads();
        } catch (const NumericError& e) {
          errors[i] = e.what();
        }
      });
      std::vector<Matrix> total;
      for (std::size_t i = 0; i < count; ++i) {
        if (!errors[i].empty()) {
          failure = errors[i];
          break;
        }
        loss_sum += losses[i];
        if (total.empty()) {
          total = std::move(grads[i]);
        } else {
          for (std::size_t k = 0; k < total.size(); ++k) total[k] += grads[i][k];
        }
      }
      if (failure) break;
      for (auto& g : total) g /= static_cast<double>(count);
      try {
        adam_step(model.params(), total, state, adam);
      } catch (const NumericError& e) {
        failure = e.what();
      }
    }
    if (failure) {
      result.stop = StopReason::kDiverged;
      result.message = "epoch " + std::to_string(epoch) + ": " + *failure;
      return result;
    }

    EpochLog entry;
    entry.epoch = epoch;
    entry.train_loss = loss_sum / static_cast<double>(n);
    try {
      const Metrics vm = val.tensors.empty() ? Metrics{} : score(model, val);
      entry.val_loss = val.tensors.empty() ? entry.train_loss : vm.loss;
      entry.val_auc = val.tensors.empty() ? std::numeric_limits<double>::quiet_NaN() : vm.auc;
    } catch (const NumericError& e) {
      result.stop = StopReason::kDiverged;
      result.message = "epoch " + std::to_string(epoch) + ": " + e.what();
      return result;
    }
    entry.lr = cfg.learning_rate;
    entry.seconds =
        deterministic ? 0.0 : std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.log.push_back(entry);

    if (entry.val_loss < result.best_val_loss) {
      result.best = model;
      result.best_epoch = epoch;
      result.best_val_loss = entry.val_loss;
      stale = 0;
    } else if (++stale >= std::max(1, cfg.patience)) {
      result.stop = StopReason::kEarlyStop;
      result.message = "no validation improvement for " + std::to_string(stale) + " epochs";
      break;
    }
  }
  return result;
}

CrossValidation cross_validate(std::span<const HeteroGraph> data, const ModelConfig& model_cfg,
                               const TrainConfig& cfg, int jobs) {
  cfg.validate();
  const auto folds = kfold_split(data.size(), cfg.folds, cfg.seed);
  CrossValidation cv;
  cv.per_fold.resize(folds.size());
  std::vector<std::optional<TrainResult>> runs(folds.size());
  auto pick = [&](const std::vector<std::size_t>& ids) {
    std::vector<HeteroGraph> out;
    out.reserve(ids.size());
    for (auto i : ids) out.push_back(data[i]);
    return out;
  };
  parallel_for(folds.size(), jobs, [&](std::size_t f) {
    const auto train_set = pick(folds[f].train);
    const auto val_set = pick(folds[f].val);
    const auto test_set = pick(folds[f].test);
    Model init(model_cfg, splitmix64(cfg.seed + 0x51ed27ULL * (f + 1)));
    runs[f] = train(train_set, val_set, std::move(init), cfg, 1, true);
    cv.per_fold[f] = evaluate(runs[f]->best, test_set);
  });
  for (auto& r : runs) cv.runs.push_back(std::move(*r));

  double auc = 0, acc = 0, f1 = 0, loss = 0;
  int auc_n = 0;
  for (const auto& m : cv.per_fold) {
    if (!std::isnan(m.auc)) {
      auc += m.auc;
      ++auc_n;
    }
    acc += m.accuracy;
    f1 += m.macro_f1;
    loss += m.loss;
    cv.mean.count += m.count;
  }
  const double k = static_cast<double>(cv.per_fold.size());
  cv.mean.auc = auc_n ? auc / auc_n : std::numeric_limits<double>::quiet_NaN();
  cv.mean.accuracy = acc / k;
  cv.mean.macro_f1 = f1 / k;
  cv.mean.loss = loss / k;
  return cv;
}

}  // namespace heat

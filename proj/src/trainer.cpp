#include "sssbathy/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <spdlog/spdlog.h>

#include "sssbathy/error.hpp"
#include "sssbathy/nn/checkpoint.hpp"
#include "sssbathy/rng.hpp"

namespace sssbathy {

using nn::Shape;
using nn::Tensor;

void OptimConfig::validate() const {
  if (epochs == 0) throw ParameterError("epochs must be > 0");
  if (batch_size == 0) throw ParameterError("batch_size must be > 0");
  if (!(learning_rate > 0.0)) throw ParameterError("learning_rate must be > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) throw ParameterError("betas must be in [0, 1)");
  if (!(eps > 0.0)) throw ParameterError("eps must be > 0");
  if (!(lr_decay > 0.0)) throw ParameterError("lr_decay must be > 0");
}

nlohmann::json OptimConfig::to_json() const {
  return {{"epochs", epochs},   {"batch_size", batch_size}, {"learning_rate", learning_rate},
          {"beta1", beta1},     {"beta2", beta2},           {"eps", eps},
          {"lr_decay", lr_decay}, {"shuffle", shuffle},     {"init_mean_from_data", init_mean_from_data}};
}

OptimConfig OptimConfig::from_json(const nlohmann::json& j) {
  OptimConfig c;
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.eps = j.value("eps", c.eps);
  c.lr_decay = j.value("lr_decay", c.lr_decay);
  c.shuffle = j.value("shuffle", c.shuffle);
  c.init_mean_from_data = j.value("init_mean_from_data", c.init_mean_from_data);
  c.validate();
  return c;
}

Adam::Adam(const std::vector<nn::NamedParam>& params, const OptimConfig& c)
    : lr_(c.learning_rate), beta1_(c.beta1), beta2_(c.beta2), eps_(c.eps) {
  for (const auto& p : params) {
    params_.push_back(p.var);
    m_.emplace_back(p.var->value.shape(), 0.0);
    v_.emplace_back(p.var->value.shape(), 0.0);
  }
}

void Adam::zero_grad() {
  for (auto& p : params_) {
    if (p->has_grad()) p->grad.fill(0.0);
  }
}

void Adam::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& p = *params_[i];
    if (!p.has_grad()) continue;
    for (std::size_t j = 0; j < p.value.numel(); ++j) {
      const double g = p.grad[j];
      m_[i][j] = beta1_ * m_[i][j] + (1.0 - beta1_) * g;
      v_[i][j] = beta2_ * v_[i][j] + (1.0 - beta2_) * g * g;
      p.value[j] -= lr_ * (m_[i][j] / bc1) / (std::sqrt(v_[i][j] / bc2) + eps_);
    }
  }
}

nlohmann::json TrainResult::metrics_json() const {
  auto arr = nlohmann::json::array();
  for (const auto& m : metrics) {
    arr.push_back({{"epoch", m.epoch},
                   {"train_nll", m.train_nll},
                   {"first_batch_nll", m.first_batch_nll},
                   {"val_nll", m.val_nll},
                   {"val_mae", m.val_mae},
                   {"steps", m.steps}});
  }
  return arr;
}

namespace {

void check_windows(std::span<const WindowSample* const> ws) {
  if (ws.empty()) throw ParameterError("empty batch");
  const std::size_t h = ws[0]->height(), w = ws[0]->width();
  for (const auto* x : ws) {
    if (x->height() != h || x->width() != w) throw ParameterError("windows in a batch differ in size");
  }
}

}  // namespace

Tensor make_input(std::span<const WindowSample* const> ws) {
  check_windows(ws);
  const std::size_t h = ws[0]->height(), w = ws[0]->width(), hw = h * w;
  Tensor t(Shape{ws.size(), 2, h, w});
  for (std::size_t n = 0; n < ws.size(); ++n) {
    std::copy_n(ws[n]->intensity.data().begin(), hw, t.data() + (2 * n) * hw);
    std::copy_n(ws[n]->sparse.data().begin(), hw, t.data() + (2 * n + 1) * hw);
  }
  return t;
}

Tensor make_target(std::span<const WindowSample* const> ws) {
  check_windows(ws);
  const std::size_t h = ws[0]->height(), w = ws[0]->width(), hw = h * w;
  Tensor t(Shape{ws.size(), 1, h, w});
  for (std::size_t n = 0; n < ws.size(); ++n) std::copy_n(ws[n]->target.data().begin(), hw, t.data() + n * hw);
  return t;
}

Tensor make_mask(std::span<const WindowSample* const> ws) {
  check_windows(ws);
  const std::size_t h = ws[0]->height(), w = ws[0]->width(), hw = h * w;
  Tensor t(Shape{ws.size(), 1, h, w});
  for (std::size_t n = 0; n < ws.size(); ++n) {
    for (std::size_t i = 0; i < hw; ++i) t[n * hw + i] = ws[n]->mask.data()[i] ? 1.0 : 0.0;
  }
  return t;
}

Evaluation evaluate(const nn::FcnModel& model, std::span<const WindowSample> windows, std::size_t batch_size) {
  Evaluation e;
  double nll = 0.0, mae = 0.0;
  std::vector<const WindowSample*> batch;
  for (std::size_t start = 0; start < windows.size(); start += batch_size) {
    batch.clear();
    for (std::size_t i = start; i < std::min(windows.size(), start + batch_size); ++i) batch.push_back(&windows[i]);
    const auto preds = model.predict(make_input(batch));
    for (std::size_t n = 0; n < batch.size(); ++n) {
      const auto& w = *batch[n];
      for (std::size_t i = 0; i < w.mask.size(); ++i) {
        if (!w.mask.data()[i]) continue;
        const double r = std::abs(w.target.data()[i] - preds[n].mu.data()[i]);
        const double v = preds[n].var.data()[i];
        nll += r / v + std::log(v);
        mae += r;
        ++e.pixels;
      }
    }
  }
  if (e.pixels > 0) {
    e.nll = nll / static_cast<double>(e.pixels);
    e.mae = mae / static_cast<double>(e.pixels);
  }
  return e;
}

TrainResult train(std::span<const WindowSample> train_set, std::span<const WindowSample> val_set,
                  const nn::FcnConfig& model_config, const OptimConfig& optim, std::uint64_t seed,
                  const std::optional<std::filesystem::path>& checkpoint_dir, const EpochCallback& on_epoch) {
  optim.validate();
  std::vector<std::size_t> usable;
  for (std::size_t i = 0; i < train_set.size(); ++i) {
    if (train_set[i].valid_count() > 0) usable.push_back(i);
  }
  if (usable.empty()) throw ParameterError("training split has no window with valid pixels");

  nn::FcnModel model(model_config, derive_seed({seed, 0x1417ULL}));
  if (optim.init_mean_from_data) {
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t i : usable) {
      const auto& w = train_set[i];
      for (std::size_t p = 0; p < w.mask.size(); ++p) {
        if (!w.mask.data()[p]) continue;
        sum += w.target.data()[p];
        ++n;
      }
    }
    model.set_mean_bias(sum / static_cast<double>(n));
  }

  Adam adam(model.parameters(), optim);
  Rng shuffle_rng(derive_seed({seed, 0x5a0ffULL}));
  TrainResult result;
  result.model_config = model.config();
  if (checkpoint_dir) std::filesystem::create_directories(*checkpoint_dir);

  std::vector<const WindowSample*> batch;
  for (std::size_t epoch = 0; epoch < optim.epochs; ++epoch) {
    std::vector<std::size_t> order = usable;
    if (optim.shuffle) {
      for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle_rng.below(i)]);
    }
    EpochMetrics m;
    m.epoch = epoch;
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += optim.batch_size) {
      batch.clear();
      for (std::size_t i = start; i < std::min(order.size(), start + optim.batch_size); ++i) {
        batch.push_back(&train_set[order[i]]);
      }
      adam.zero_grad();
      const auto out = model.forward(nn::constant(make_input(batch)));
      const auto loss = nn::laplace_nll(out.mu, out.var, make_target(batch), make_mask(batch));
      const double value = loss->value[0];
      if (!std::isfinite(value)) {
        throw TrainingDiverged("non-finite training loss at epoch " + std::to_string(epoch) + ", step " +
                               std::to_string(m.steps) + " (learning rate " + std::to_string(adam.learning_rate()) +
                               ")");
      }
      nn::backward(loss);
      adam.step();
      if (m.steps == 0) m.first_batch_nll = value;
      loss_sum += value;
      ++m.steps;
    }
    m.train_nll = loss_sum / static_cast<double>(m.steps);
    if (!val_set.empty()) {
      const Evaluation ev = evaluate(model, val_set, optim.batch_size);
      m.val_nll = ev.nll;
      m.val_mae = ev.mae;
    } else {
      m.val_nll = m.train_nll;
    }
    result.metrics.push_back(m);
    result.checkpoints.push_back({epoch, m.val_nll, m.val_mae, model.state()});
    if (checkpoint_dir) {
      nn::write_checkpoint(*checkpoint_dir / ("epoch" + std::to_string(epoch)), model,
                           {{"epoch", epoch}, {"val_nll", m.val_nll}, {"val_mae", m.val_mae}, {"train_nll", m.train_nll}});
    }
    spdlog::info("epoch {}: train nll {:.4f}, val nll {:.4f}, val mae {:.4f} m", epoch, m.train_nll, m.val_nll,
                 m.val_mae);
    if (on_epoch) on_epoch(m);
    adam.set_learning_rate(adam.learning_rate() * optim.lr_decay);
  }
  return result;
}

std::vector<std::size_t> select_best(std::span<const ModelCheckpoint> checkpoints, std::size_t k) {
  if (k == 0 || k > checkpoints.size()) throw ParameterError("k must be in [1, number of checkpoints]");
  std::vector<std::size_t> idx(checkpoints.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (checkpoints[a].val_nll != checkpoints[b].val_nll) return checkpoints[a].val_nll < checkpoints[b].val_nll;
    return checkpoints[a].epoch < checkpoints[b].epoch;
  });
  idx.resize(k);
  return idx;
}

std::vector<nn::FcnModel> materialize(const TrainResult& result, std::span<const std::size_t> indices) {
  std::vector<nn::FcnModel> models;
  for (std::size_t i : indices) {
    if (i >= result.checkpoints.size()) throw ParameterError("checkpoint index out of range");
    nn::FcnModel m(result.model_config, 0);
    m.load_state(result.checkpoints[i].state);
    models.push_back(std::move(m));
  }
  return models;
}

nn::Prediction ensemble_combine(std::span<const nn::Prediction> members) {
  if (members.empty()) throw ParameterError("ensemble needs at least one member");
  if (members.size() == 1) return members[0];
  const std::size_t rows = members[0].mu.rows(), cols = members[0].mu.cols();
  for (const auto& m : members) {
    if (m.mu.rows() != rows || m.mu.cols() != cols || m.var.rows() != rows || m.var.cols() != cols) {
      throw ParameterError("ensemble members differ in shape");
    }
  }
  const double inv = 1.0 / static_cast<double>(members.size());
  nn::Prediction out{Array2D<double>(rows, cols, 0.0), Array2D<double>(rows, cols, 0.0)};
  for (std::size_t i = 0; i < rows * cols; ++i) {
    double mu = 0.0, var = 0.0, second = 0.0;
    for (const auto& m : members) {
      mu += m.mu.data()[i];
      var += m.var.data()[i];
      second += m.mu.data()[i] * m.mu.data()[i];
    }
    mu *= inv;
    // Spread term is clamped so rounding cannot push it below zero.
    const double spread = std::max(0.0, second * inv - mu * mu);
    out.mu.data()[i] = mu;
    out.var.data()[i] = var * inv + spread;
  }
  return out;
}

std::vector<nn::Prediction> ensemble_predict(std::span<const nn::FcnModel> models,
                                             std::span<const WindowSample> windows, std::size_t batch_size) {
  if (models.empty()) throw ParameterError("ensemble needs at least one model");
  std::vector<nn::Prediction> out;
  out.reserve(windows.size());
  std::vector<const WindowSample*> batch;
  for (std::size_t start = 0; start < windows.size(); start += batch_size) {
    batch.clear();
    for (std::size_t i = start; i < std::min(windows.size(), start + batch_size); ++i) batch.push_back(&windows[i]);
    const Tensor input = make_input(batch);
    std::vector<std::vector<nn::Prediction>> per_model;
    for (const auto& m : models) per_model.push_back(m.predict(input));
    for (std::size_t n = 0; n < batch.size(); ++n) {
      std::vector<nn::Prediction> members;
      for (auto& pm : per_model) members.push_back(std::move(pm[n]));
      out.push_back(ensemble_combine(members));
    }
  }
  return out;
}

}  // namespace sssbathy

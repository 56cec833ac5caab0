#include "sssbathy/nn/fcn.hpp"

#include <cmath>

#include "sssbathy/error.hpp"

namespace sssbathy::nn {

namespace {

Tensor uniform_tensor(Shape s, double bound, Rng& rng) {
  Tensor t(s);
  for (double& v : t.values()) v = rng.uniform(-bound, bound);
  return t;
}

}  // namespace

void FcnConfig::validate() const {
  if (in_channels == 0 || base_channels == 0) throw ParameterError("channel counts must be > 0");
  for (std::size_t k : {first_kernel, down_kernel, res_kernel, up_kernel, head_kernel}) {
    if (k == 0 || k % 2 == 0) throw ParameterError("kernel sizes must be odd");
  }
  if (down_strides.empty()) throw ParameterError("need at least one downsampling stage");
  for (std::size_t s : down_strides) {
    if (s != 1 && s != 2) throw ParameterError("downsampling strides must be 1 or 2");
  }
  if (!(var_floor > 0.0)) throw ParameterError("var_floor must be > 0");
}

nlohmann::json FcnConfig::to_json() const {
  return {{"in_channels", in_channels},   {"base_channels", base_channels}, {"n_res_blocks", n_res_blocks},
          {"first_kernel", first_kernel}, {"down_kernel", down_kernel},     {"res_kernel", res_kernel},
          {"up_kernel", up_kernel},       {"head_kernel", head_kernel},     {"down_strides", down_strides},
          {"norm_eps", norm_eps},         {"var_floor", var_floor}};
}

FcnConfig FcnConfig::from_json(const nlohmann::json& j) {
  FcnConfig c;
  c.in_channels = j.value("in_channels", c.in_channels);
  c.base_channels = j.value("base_channels", c.base_channels);
  c.n_res_blocks = j.value("n_res_blocks", c.n_res_blocks);
  c.first_kernel = j.value("first_kernel", c.first_kernel);
  c.down_kernel = j.value("down_kernel", c.down_kernel);
  c.res_kernel = j.value("res_kernel", c.res_kernel);
  c.up_kernel = j.value("up_kernel", c.up_kernel);
  c.head_kernel = j.value("head_kernel", c.head_kernel);
  c.down_strides = j.value("down_strides", c.down_strides);
  c.norm_eps = j.value("norm_eps", c.norm_eps);
  c.var_floor = j.value("var_floor", c.var_floor);
  c.validate();
  return c;
}

Conv2d::Conv2d(std::size_t in, std::size_t out, std::size_t kernel, std::size_t stride, std::size_t pad, Rng& rng)
    : geometry{stride, pad, 0} {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in * kernel * kernel));
  weight = parameter(uniform_tensor(Shape{out, in, kernel, kernel}, bound, rng));
  bias = parameter(uniform_tensor(Shape{out, 1, 1, 1}, bound, rng));
}

ConvTranspose2d::ConvTranspose2d(std::size_t in, std::size_t out, std::size_t kernel, std::size_t stride,
                                 std::size_t pad, std::size_t output_pad, Rng& rng)
    : geometry{stride, pad, output_pad} {
  // fan_in of the adjoint convolution: out * k * k.
  const double bound = 1.0 / std::sqrt(static_cast<double>(out * kernel * kernel));
  weight = parameter(uniform_tensor(Shape{in, out, kernel, kernel}, bound, rng));
  bias = parameter(uniform_tensor(Shape{out, 1, 1, 1}, bound, rng));
}

ResidualBlock::ResidualBlock(std::size_t channels, std::size_t kernel, double eps_, Rng& rng)
    : conv1(channels, channels, kernel, 1, kernel / 2, rng),
      conv2(channels, channels, kernel, 1, kernel / 2, rng),
      eps(eps_) {}

Var ResidualBlock::operator()(const Var& x) const {
  Var h = relu(instance_norm(conv1(x), eps));
  h = instance_norm(conv2(h), eps);
  return add(x, h);
}

FcnModel::FcnModel(FcnConfig config, std::uint64_t seed) : config_(std::move(config)) {
  config_.validate();
  Rng rng(seed);
  std::size_t channels = config_.in_channels;
  for (std::size_t i = 0; i < config_.down_strides.size(); ++i) {
    const std::size_t k = i == 0 ? config_.first_kernel : config_.down_kernel;
    const std::size_t out = config_.base_channels << i;
    down_.emplace_back(channels, out, k, config_.down_strides[i], k / 2, rng);
    channels = out;
  }
  for (std::size_t i = 0; i < config_.n_res_blocks; ++i) {
    res_.emplace_back(channels, config_.res_kernel, config_.norm_eps, rng);
  }
  for (std::size_t s : config_.down_strides) {
    if (s != 2) continue;
    const std::size_t out = std::max<std::size_t>(config_.base_channels, channels / 2);
    up_.emplace_back(channels, out, config_.up_kernel, 2, config_.up_kernel / 2, 1, rng);
    channels = out;
  }
  head_ = Conv2d(channels, 2, config_.head_kernel, 1, config_.head_kernel / 2, rng);
  register_params();
}

void FcnModel::register_params() {
  params_.clear();
  for (std::size_t i = 0; i < down_.size(); ++i) {
    params_.push_back({"down" + std::to_string(i) + ".weight", down_[i].weight});
    params_.push_back({"down" + std::to_string(i) + ".bias", down_[i].bias});
  }
  for (std::size_t i = 0; i < res_.size(); ++i) {
    const std::string p = "res" + std::to_string(i);
    params_.push_back({p + ".conv1.weight", res_[i].conv1.weight});
    params_.push_back({p + ".conv1.bias", res_[i].conv1.bias});
    params_.push_back({p + ".conv2.weight", res_[i].conv2.weight});
    params_.push_back({p + ".conv2.bias", res_[i].conv2.bias});
  }
  for (std::size_t i = 0; i < up_.size(); ++i) {
    params_.push_back({"up" + std::to_string(i) + ".weight", up_[i].weight});
    params_.push_back({"up" + std::to_string(i) + ".bias", up_[i].bias});
  }
  params_.push_back({"head.weight", head_.weight});
  params_.push_back({"head.bias", head_.bias});
}

FcnModel::Output FcnModel::forward(const Var& input) const {
  const Shape s = input->value.shape();
  if (s.c != config_.in_channels) {
    throw ParameterError("model expects " + std::to_string(config_.in_channels) + " input channels, got " +
                         std::to_string(s.c));
  }
  Var h = input;
  for (const auto& d : down_) h = relu(instance_norm(d(h), config_.norm_eps));
  for (const auto& r : res_) h = r(h);
  for (const auto& u : up_) h = relu(instance_norm(u(h), config_.norm_eps));
  const Var out = head_(h);
  const Shape os = out->value.shape();
  if (os.h != s.h || os.w != s.w) {
    throw ParameterError("input " + s.str() + " is not compatible with the model's downsampling (output " +
                         os.str() + ")");
  }
  return {select_channel(out, 0), softplus(select_channel(out, 1), config_.var_floor)};
}

std::vector<Prediction> FcnModel::predict(const Tensor& input) const {
  NoGradGuard guard;
  const Output out = forward(constant(input));
  const Shape s = out.mu->value.shape();
  std::vector<Prediction> preds(s.n);
  for (std::size_t n = 0; n < s.n; ++n) {
    preds[n].mu = Array2D<double>(s.h, s.w);
    preds[n].var = Array2D<double>(s.h, s.w);
    std::copy_n(out.mu->value.data() + n * s.plane(), s.plane(), preds[n].mu.data().begin());
    std::copy_n(out.var->value.data() + n * s.plane(), s.plane(), preds[n].var.data().begin());
  }
  return preds;
}

std::size_t FcnModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.var->value.numel();
  return n;
}

std::vector<Tensor> FcnModel::state() const {
  std::vector<Tensor> s;
  s.reserve(params_.size());
  for (const auto& p : params_) s.push_back(p.var->value);
  return s;
}

void FcnModel::load_state(const std::vector<Tensor>& state) {
  if (state.size() != params_.size()) throw ParameterError("state has the wrong number of tensors");
  for (std::size_t i = 0; i < state.size(); ++i) {
    check_same_shape(params_[i].var->value, state[i], params_[i].name.c_str());
    params_[i].var->value = state[i];
  }
}

FcnModel FcnModel::clone() const {
  FcnModel m(config_, 0);
  m.load_state(state());
  return m;
}

void FcnModel::set_mean_bias(double value) { head_.bias->value[0] = value; }

void FcnModel::zero_head() {
  head_.weight->value.fill(0.0);
  head_.bias->value.fill(0.0);
}

}  // namespace sssbathy::nn

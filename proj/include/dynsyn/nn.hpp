#pragma once

// Small dense networks for the actor and critics. Batches are matrices
// with one sample per column. All parameters of a network live in one flat
// vector so optimizer state and checkpoints are plain arrays.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <string>
#include <vector>

#include "dynsyn/checksum.hpp"
#include "dynsyn/errors.hpp"
#include "dynsyn/random.hpp"

namespace dynsyn::nn {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using ConstMatMap = Eigen::Map<const MatrixXd>;
using MatMap = Eigen::Map<MatrixXd>;

class Mlp {
 public:
  struct Cache {
    // activations[0] is the input; activations[l] the post-ReLU output of
    // hidden layer l. The linear output is not cached.
    std::vector<MatrixXd> activations;
  };

  Mlp() = default;

  // sizes = {in, hidden..., out}; parameters start at zero.
  explicit Mlp(std::vector<int> sizes) : sizes_(std::move(sizes)) {
    if (sizes_.size() < 2) throw ParameterError("Mlp: need at least input and output sizes");
    std::size_t total = 0;
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
      if (sizes_[l] < 1 || sizes_[l + 1] < 1) throw ParameterError("Mlp: layer sizes must be >= 1");
      w_offset_.push_back(total);
      total += static_cast<std::size_t>(sizes_[l + 1]) * static_cast<std::size_t>(sizes_[l]);
      b_offset_.push_back(total);
      total += static_cast<std::size_t>(sizes_[l + 1]);
    }
    params_ = VectorXd::Zero(static_cast<Eigen::Index>(total));
  }

  Mlp(std::vector<int> sizes, Rng& rng) : Mlp(std::move(sizes)) { init(rng); }

  // U(-sqrt(1/fan_in), sqrt(1/fan_in)) for weights and biases.
  void init(Rng& rng) {
    for (std::size_t l = 0; l < layers(); ++l) {
      const double bound = std::sqrt(1.0 / sizes_[l]);
      auto w = weight(l);
      for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = uniform(rng, -bound, bound);
      auto b = bias(l);
      for (Eigen::Index i = 0; i < b.size(); ++i) b[i] = uniform(rng, -bound, bound);
    }
  }

  std::size_t layers() const { return w_offset_.size(); }
  int input_size() const { return sizes_.front(); }
  int output_size() const { return sizes_.back(); }
  const std::vector<int>& sizes() const { return sizes_; }

  VectorXd& params() { return params_; }
  const VectorXd& params() const { return params_; }

  MatMap weight(std::size_t l) {
    return {params_.data() + w_offset_[l], sizes_[l + 1], sizes_[l]};
  }
  ConstMatMap weight(std::size_t l) const {
    return {params_.data() + w_offset_[l], sizes_[l + 1], sizes_[l]};
  }
  Eigen::Map<VectorXd> bias(std::size_t l) { return {params_.data() + b_offset_[l], sizes_[l + 1]}; }
  Eigen::Map<const VectorXd> bias(std::size_t l) const {
    return {params_.data() + b_offset_[l], sizes_[l + 1]};
  }

  MatrixXd forward(const MatrixXd& x, Cache* cache = nullptr) const {
    if (x.rows() != input_size())
      throw ParameterError("Mlp::forward: input has " + std::to_string(x.rows()) + " rows, expected " +
                           std::to_string(input_size()));
    if (cache) {
      cache->activations.clear();
      cache->activations.push_back(x);
    }
    MatrixXd h = x;
    for (std::size_t l = 0; l < layers(); ++l) {
      MatrixXd z = weight(l) * h;
      z.colwise() += bias(l);
      if (l + 1 == layers()) return z;
      h = z.cwiseMax(0.0);
      if (cache) cache->activations.push_back(h);
    }
    return h;
  }

  VectorXd forward_one(const VectorXd& x) const { return forward(MatrixXd(x)).col(0); }

  // Accumulates dL/dparams into `grad` (resized and zeroed when empty) and
  // returns dL/dx.
  MatrixXd backward(const Cache& cache, const MatrixXd& dy, VectorXd& grad) const {
    if (cache.activations.size() != layers())
      throw ParameterError("Mlp::backward: cache does not belong to this network");
    if (dy.rows() != output_size() || dy.cols() != cache.activations[0].cols())
      throw ParameterError("Mlp::backward: output gradient has the wrong shape");
    if (grad.size() == 0) grad = VectorXd::Zero(params_.size());
    if (grad.size() != params_.size()) throw ParameterError("Mlp::backward: gradient size mismatch");
    MatrixXd delta = dy;
    for (std::size_t l = layers(); l-- > 0;) {
      const MatrixXd& in = cache.activations[l];
      MatMap(grad.data() + w_offset_[l], sizes_[l + 1], sizes_[l]).noalias() += delta * in.transpose();
      Eigen::Map<VectorXd>(grad.data() + b_offset_[l], sizes_[l + 1]) += delta.rowwise().sum();
      MatrixXd dx = weight(l).transpose() * delta;
      if (l == 0) return dx;
      delta = dx.cwiseProduct((in.array() > 0.0).cast<double>().matrix());
    }
    return delta;
  }

  bool operator==(const Mlp& o) const { return sizes_ == o.sizes_ && params_ == o.params_; }

 private:
  std::vector<int> sizes_;
  std::vector<std::size_t> w_offset_, b_offset_;
  VectorXd params_;
};

// lr(t) = initial * max(0, 1 - t / total); total = 0 keeps lr constant.
struct LinearSchedule {
  double initial = 1e-3;
  std::uint64_t total = 0;

  double at(std::uint64_t t) const {
    if (total == 0) return initial;
    return initial * std::max(0.0, 1.0 - static_cast<double>(t) / static_cast<double>(total));
  }
};

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  LinearSchedule schedule;
  VectorXd m, v;
  std::uint64_t step = 0;

  AdamState() = default;
  AdamState(Eigen::Index n, LinearSchedule s) : schedule(s), m(VectorXd::Zero(n)), v(VectorXd::Zero(n)) {}
};

// One bias-corrected Adam update with learning rate `lr`.
inline void adam_step(VectorXd& params, const VectorXd& grad, AdamState& state, double lr) {
  if (state.m.size() == 0) {
    state.m = VectorXd::Zero(params.size());
    state.v = VectorXd::Zero(params.size());
  }
  if (grad.size() != params.size() || state.m.size() != params.size())
    throw ParameterError("adam_step: shape mismatch");
  ++state.step;
  state.m = state.beta1 * state.m + (1.0 - state.beta1) * grad;
  state.v = state.beta2 * state.v + (1.0 - state.beta2) * grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  params.array() -= lr * (state.m.array() / c1) / ((state.v.array() / c2).sqrt() + state.eps);
}

// Uses the state's schedule evaluated at `progress` (an external step
// count such as environment steps).
inline void adam_step_scheduled(VectorXd& params, const VectorXd& grad, AdamState& state,
                                std::uint64_t progress) {
  adam_step(params, grad, state, state.schedule.at(progress));
}

// ---------------------------------------------------------------------------
// Checkpoints

// Named float64 arrays and text fields. File layout: 8-byte magic
// "DYNSYNCK", u32 version, u32 entry count, entries, then the FNV-1a hash
// of everything before it as u64. Entry: u8 kind (0 array, 1 text), u32
// name length, name bytes, u64 element count, payload.
class Archive {
 public:
  static constexpr std::uint32_t kVersion = 1;

  void put(const std::string& name, const VectorXd& v) { arrays_[name] = v; }
  void put_text(const std::string& name, const std::string& s) { texts_[name] = s; }
  void put_mlp(const std::string& name, const Mlp& net) {
    VectorXd sizes(static_cast<Eigen::Index>(net.sizes().size()));
    for (std::size_t i = 0; i < net.sizes().size(); ++i) sizes[static_cast<Eigen::Index>(i)] = net.sizes()[i];
    put(name + ".sizes", sizes);
    put(name + ".params", net.params());
  }
  void put_adam(const std::string& name, const AdamState& s) {
    put(name + ".m", s.m);
    put(name + ".v", s.v);
    VectorXd meta(6);
    meta << s.beta1, s.beta2, s.eps, s.schedule.initial, static_cast<double>(s.schedule.total),
        static_cast<double>(s.step);
    put(name + ".meta", meta);
  }

  bool has(const std::string& name) const { return arrays_.count(name) || texts_.count(name); }

  const VectorXd& get(const std::string& name) const {
    auto it = arrays_.find(name);
    if (it == arrays_.end()) throw FormatError("checkpoint: missing array '" + name + "'");
    return it->second;
  }
  const std::string& get_text(const std::string& name) const {
    auto it = texts_.find(name);
    if (it == texts_.end()) throw FormatError("checkpoint: missing field '" + name + "'");
    return it->second;
  }
  Mlp get_mlp(const std::string& name) const {
    const VectorXd& s = get(name + ".sizes");
    std::vector<int> sizes;
    for (Eigen::Index i = 0; i < s.size(); ++i) sizes.push_back(static_cast<int>(s[i]));
    Mlp net(sizes);
    const VectorXd& p = get(name + ".params");
    if (p.size() != net.params().size()) throw FormatError("checkpoint: '" + name + "' parameter count mismatch");
    net.params() = p;
    return net;
  }
  AdamState get_adam(const std::string& name) const {
    AdamState s;
    s.m = get(name + ".m");
    s.v = get(name + ".v");
    const VectorXd& meta = get(name + ".meta");
    if (meta.size() != 6) throw FormatError("checkpoint: bad optimizer metadata for '" + name + "'");
    s.beta1 = meta[0];
    s.beta2 = meta[1];
    s.eps = meta[2];
    s.schedule = {meta[3], static_cast<std::uint64_t>(meta[4])};
    s.step = static_cast<std::uint64_t>(meta[5]);
    return s;
  }

  std::string serialize() const {
    std::string out("DYNSYNCK", 8);
    append(out, kVersion);
    append(out, static_cast<std::uint32_t>(arrays_.size() + texts_.size()));
    for (const auto& [name, v] : arrays_) {
      header(out, 0, name, static_cast<std::uint64_t>(v.size()));
      out.append(reinterpret_cast<const char*>(v.data()), static_cast<std::size_t>(v.size()) * sizeof(double));
    }
    for (const auto& [name, s] : texts_) {
      header(out, 1, name, s.size());
      out += s;
    }
    append(out, fnv1a64(out));
    return out;
  }

  static Archive deserialize(const std::string& bytes) {
    if (bytes.size() < 24 || bytes.compare(0, 8, "DYNSYNCK") != 0) throw FormatError("checkpoint: bad magic");
    std::uint64_t stored = 0;
    std::memcpy(&stored, bytes.data() + bytes.size() - 8, 8);
    if (stored != fnv1a64(std::string_view(bytes).substr(0, bytes.size() - 8)))
      throw FormatError("checkpoint: checksum mismatch");
    std::size_t pos = 8;
    const std::size_t end = bytes.size() - 8;
    auto read = [&](void* dst, std::size_t n) {
      if (pos + n > end) throw FormatError("checkpoint: truncated");
      std::memcpy(dst, bytes.data() + pos, n);
      pos += n;
    };
    std::uint32_t version = 0, count = 0;
    read(&version, 4);
    if (version != kVersion) throw FormatError("checkpoint: unsupported version " + std::to_string(version));
    read(&count, 4);
    Archive a;
    for (std::uint32_t e = 0; e < count; ++e) {
      std::uint8_t kind = 0;
      std::uint32_t name_len = 0;
      std::uint64_t n = 0;
      read(&kind, 1);
      read(&name_len, 4);
      std::string name(name_len, '\0');
      read(name.data(), name_len);
      read(&n, 8);
      if (kind == 0) {
        if (n > (end - pos) / sizeof(double)) throw FormatError("checkpoint: truncated");
        VectorXd v(static_cast<Eigen::Index>(n));
        read(v.data(), n * sizeof(double));
        a.arrays_[name] = std::move(v);
      } else if (kind == 1) {
        if (n > end - pos) throw FormatError("checkpoint: truncated");
        std::string s(n, '\0');
        read(s.data(), n);
        a.texts_[name] = std::move(s);
      } else {
        throw FormatError("checkpoint: unknown entry kind");
      }
    }
    if (pos != end) throw FormatError("checkpoint: trailing bytes");
    return a;
  }

  void save(const std::string& path) const {
    const std::string bytes = serialize();
    const std::string tmp = path + ".tmp";
    {
      std::ofstream out(tmp, std::ios::binary);
      if (!out) throw FormatError("cannot write '" + tmp + "'");
      out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
      if (!out) throw FormatError("short write to '" + tmp + "'");
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) throw FormatError("cannot move checkpoint into '" + path + "'");
  }

  static Archive load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw LookupError("cannot open '" + path + "'");
    return deserialize(std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>()));
  }

 private:
  template <typename T>
  static void append(std::string& out, T v) {
    out.append(reinterpret_cast<const char*>(&v), sizeof v);
  }
  static void header(std::string& out, std::uint8_t kind, const std::string& name, std::uint64_t n) {
    append(out, kind);
    append(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    append(out, n);
  }

  std::map<std::string, VectorXd> arrays_;
  std::map<std::string, std::string> texts_;
};

}  // namespace dynsyn::nn

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "fibcap/tensor.hpp"

namespace fibcap {

// Pre-activation residual block: x + conv(relu(gn(conv(relu(gn(x)))))).
template <typename T>
struct ResBlock {
  GroupNorm<T> gn1, gn2;
  ReLU<T> relu1, relu2;
  Conv2d<T> conv1, conv2;

  ResBlock() = default;
  ResBlock(int channels, int groups)
      : gn1(channels, groups), gn2(channels, groups),
        conv1(channels, channels, 3), conv2(channels, channels, 3) {}

  void init(std::mt19937_64& rng) {
    conv1.init_kaiming(rng);
    conv2.init_kaiming(rng);
  }

  Tensor<T> forward(const Tensor<T>& x) {
    Tensor<T> h = conv1.forward(relu1.forward(gn1.forward(x)));
    h = conv2.forward(relu2.forward(gn2.forward(h)));
    for (size_t i = 0; i < h.size(); ++i) h.v[i] += x.v[i];
    return h;
  }

  Tensor<T> backward(const Tensor<T>& gy) {
    Tensor<T> g = gn2.backward(relu2.backward(conv2.backward(gy)));
    g = gn1.backward(relu1.backward(conv1.backward(g)));
    for (size_t i = 0; i < g.size(); ++i) g.v[i] += gy.v[i];
    return g;
  }

  void collect(const std::string& prefix, std::vector<ParamRef<T>>& out) {
    gn1.collect(prefix + ".gn1", out);
    conv1.collect(prefix + ".conv1", out);
    gn2.collect(prefix + ".gn2", out);
    conv2.collect(prefix + ".conv2", out);
  }
};

// Encoder-decoder segmentation network: initial 3x3 conv + spatial dropout,
// residual encoder levels joined by strided downsampling convs that double
// the filter count, and a lighter decoder (1x1 channel reduction, x2
// bilinear upsampling, additive encoder skip, one block per level) ending in
// a 1x1 conv and sigmoid over a single output channel.
template <typename T>
class SegResNet {
 public:
  struct Config {
    int in_channels = 1;
    int init_filters = 16;
    int levels = 4;
    double dropout = 0.2;
    int gn_groups = 8;
  };

  SegResNet() = default;
  explicit SegResNet(const Config& cfg, uint64_t seed = 0)
      : cfg_(cfg), drop_(cfg.dropout), rng_(seed) {
    if (cfg.levels < 1) throw std::invalid_argument("SegResNet: levels must be >= 1");
    if (cfg.init_filters % cfg.gn_groups != 0)
      throw std::invalid_argument("SegResNet: init_filters must divide by gn_groups");

    init_conv_ = Conv2d<T>(cfg.in_channels, cfg.init_filters, 3);
    enc0_ = {ResBlock<T>(cfg.init_filters, cfg.gn_groups),
             ResBlock<T>(cfg.init_filters, cfg.gn_groups)};
    int ch = cfg.init_filters;
    for (int l = 1; l < cfg.levels; ++l) {
      down_.emplace_back(ch, 2 * ch, 3, 2);
      ch *= 2;
      enc_.emplace_back(ch, cfg.gn_groups);
    }
    for (int l = cfg.levels - 1; l >= 1; --l) {
      const int deep = cfg.init_filters << l;
      reduce_.emplace_back(deep, deep / 2, 1);
      up_.emplace_back();
      dec_.emplace_back(deep / 2, cfg.gn_groups);
    }
    head_ = Conv2d<T>(cfg.init_filters, 1, 1);

    init_conv_.init_kaiming(rng_);
    for (auto& b : enc0_) b.init(rng_);
    for (auto& c : down_) c.init_kaiming(rng_);
    for (auto& b : enc_) b.init(rng_);
    for (auto& c : reduce_) c.init_kaiming(rng_);
    for (auto& b : dec_) b.init(rng_);
    head_.init_kaiming(rng_);
  }

  const Config& config() const { return cfg_; }

  // Feature map channel count per encoder level.
  int filters_at(int level) const { return cfg_.init_filters << level; }

  Tensor<T> forward(const Tensor<T>& x, bool training = false) {
    const int L = cfg_.levels;
    Tensor<T> a = drop_.forward(init_conv_.forward(x), training, rng_);
    enc_out_.assign(L, {});
    for (auto& b : enc0_) a = b.forward(a);
    enc_out_[0] = a;
    for (int l = 1; l < L; ++l) {
      a = enc_[l - 1].forward(down_[l - 1].forward(a));
      enc_out_[l] = a;
    }

    Tensor<T> d = enc_out_[L - 1];
    crop_h_.assign(L, 0);
    crop_w_.assign(L, 0);
    for (int i = 0; i < L - 1; ++i) {
      const int l = L - 1 - i;  // decoder level, deep to shallow
      Tensor<T> z = up_[i].forward(reduce_[i].forward(d));
      const Tensor<T>& skip = enc_out_[l - 1];
      crop_h_[l] = z.h - skip.h;
      crop_w_[l] = z.w - skip.w;
      Tensor<T> merged(skip.n, skip.c, skip.h, skip.w);
      for (int ni = 0; ni < skip.n; ++ni)
        for (int ci = 0; ci < skip.c; ++ci)
          for (int hi = 0; hi < skip.h; ++hi)
            for (int wi = 0; wi < skip.w; ++wi)
              merged.at(ni, ci, hi, wi) =
                  z.at(ni, ci, hi, wi) + skip.at(ni, ci, hi, wi);
      d = dec_[i].forward(merged);
    }
    Tensor<T> y = sigmoid_.forward(head_.forward(d));
    y.check_finite("SegResNet::forward");
    return y;
  }

  // Gradient wrt the input; parameter gradients accumulate into the layers.
  Tensor<T> backward(const Tensor<T>& gy) {
    const int L = cfg_.levels;
    Tensor<T> g = head_.backward(sigmoid_.backward(gy));

    std::vector<Tensor<T>> skip_grad(L);
    for (int i = L - 2; i >= 0; --i) {
      const int l = L - 1 - i;
      g = dec_[i].backward(g);
      skip_grad[l - 1] = g;  // additive skip passes the gradient through
      // undo the crop: pad the gradient back to the upsampled size
      Tensor<T> gz(g.n, g.c, g.h + crop_h_[l], g.w + crop_w_[l], T{});
      for (int ni = 0; ni < g.n; ++ni)
        for (int ci = 0; ci < g.c; ++ci)
          for (int hi = 0; hi < g.h; ++hi)
            for (int wi = 0; wi < g.w; ++wi)
              gz.at(ni, ci, hi, wi) = g.at(ni, ci, hi, wi);
      g = reduce_[i].backward(up_[i].backward(gz));
    }

    for (int l = L - 1; l >= 1; --l) {
      if (skip_grad[l].n != 0)
        for (size_t i = 0; i < g.size(); ++i) g.v[i] += skip_grad[l].v[i];
      g = down_[l - 1].backward(enc_[l - 1].backward(g));
    }
    if (L >= 1 && skip_grad[0].n != 0)
      for (size_t i = 0; i < g.size(); ++i) g.v[i] += skip_grad[0].v[i];
    for (int b = static_cast<int>(enc0_.size()) - 1; b >= 0; --b)
      g = enc0_[b].backward(g);
    return init_conv_.backward(drop_.backward(g));
  }

  std::vector<ParamRef<T>> params() {
    std::vector<ParamRef<T>> out;
    init_conv_.collect("init_conv", out);
    for (size_t b = 0; b < enc0_.size(); ++b)
      enc0_[b].collect("enc0.b" + std::to_string(b), out);
    for (size_t l = 0; l < down_.size(); ++l) {
      down_[l].collect("down" + std::to_string(l + 1), out);
      enc_[l].collect("enc" + std::to_string(l + 1) + ".b0", out);
    }
    for (size_t i = 0; i < dec_.size(); ++i) {
      const int l = cfg_.levels - 1 - static_cast<int>(i);
      reduce_[i].collect("dec" + std::to_string(l) + ".reduce", out);
      dec_[i].collect("dec" + std::to_string(l) + ".b0", out);
    }
    head_.collect("head", out);
    return out;
  }

  void zero_grad() {
    for (auto& p : params()) std::fill(p.grad->begin(), p.grad->end(), T{});
  }

  // Names of conv kernel weights (L2 regularization applies to these only).
  bool is_conv_kernel(const std::string& name) const {
    return name.size() > 7 && name.substr(name.size() - 7) == ".weight";
  }

  std::mt19937_64& rng() { return rng_; }

  // (channels, h, w) of each encoder level output after the last forward.
  std::vector<std::array<int, 3>> encoder_shapes() const {
    std::vector<std::array<int, 3>> out;
    for (const auto& e : enc_out_) out.push_back({e.c, e.h, e.w});
    return out;
  }

 private:
  Config cfg_;
  Conv2d<T> init_conv_;
  SpatialDropout<T> drop_{0.2};
  std::vector<ResBlock<T>> enc0_;
  std::vector<Conv2d<T>> down_;
  std::vector<ResBlock<T>> enc_;
  std::vector<Conv2d<T>> reduce_;  // decoder order: deep to shallow
  std::vector<BilinearUp2<T>> up_;
  std::vector<ResBlock<T>> dec_;
  Conv2d<T> head_;
  Sigmoid<T> sigmoid_;
  std::mt19937_64 rng_;

  std::vector<Tensor<T>> enc_out_;
  std::vector<int> crop_h_, crop_w_;
};

// ---- Weights file (.fcw) ------------------------------------------------
// magic "FCW1", then per-parameter records:
//   u32 name length, name bytes, u8 dtype (0 = f32, 1 = f64), u8 rank,
//   u32 dims[rank], little-endian payload.

struct WeightsLoadReport {
  std::vector<std::string> matched;
  std::vector<std::string> randomly_initialized;  // in model, not in file
  std::vector<std::string> ignored;               // in file, not in model
};

template <typename T>
void save_weights(SegResNet<T>& model, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f.write("FCW1", 4);
  const uint8_t dtype = sizeof(T) == 8 ? 1 : 0;
  for (auto& p : model.params()) {
    const uint32_t nlen = static_cast<uint32_t>(p.name.size());
    f.write(reinterpret_cast<const char*>(&nlen), 4);
    f.write(p.name.data(), nlen);
    f.write(reinterpret_cast<const char*>(&dtype), 1);
    const uint8_t rank = static_cast<uint8_t>(p.dims.size());
    f.write(reinterpret_cast<const char*>(&rank), 1);
    for (int d : p.dims) {
      const uint32_t dd = static_cast<uint32_t>(d);
      f.write(reinterpret_cast<const char*>(&dd), 4);
    }
    f.write(reinterpret_cast<const char*>(p.value->data()),
            static_cast<std::streamsize>(p.value->size() * sizeof(T)));
  }
}

struct WeightRecord {
  std::vector<int> dims;
  std::vector<double> values;
};

inline std::map<std::string, WeightRecord> read_weights_file(
    const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path.string());
  char magic[4];
  f.read(magic, 4);
  if (!f || std::string(magic, 4) != "FCW1")
    throw std::runtime_error("bad magic in weights file " + path.string());
  std::map<std::string, WeightRecord> recs;
  while (true) {
    uint32_t nlen;
    f.read(reinterpret_cast<char*>(&nlen), 4);
    if (!f) break;  // clean EOF
    std::string name(nlen, '\0');
    f.read(name.data(), nlen);
    uint8_t dtype, rank;
    f.read(reinterpret_cast<char*>(&dtype), 1);
    f.read(reinterpret_cast<char*>(&rank), 1);
    if (!f || dtype > 1) throw std::runtime_error("corrupt weights record");
    WeightRecord rec;
    size_t count = 1;
    for (int i = 0; i < rank; ++i) {
      uint32_t d;
      f.read(reinterpret_cast<char*>(&d), 4);
      rec.dims.push_back(static_cast<int>(d));
      count *= d;
    }
    rec.values.resize(count);
    if (dtype == 0) {
      std::vector<float> buf(count);
      f.read(reinterpret_cast<char*>(buf.data()),
             static_cast<std::streamsize>(count * 4));
      for (size_t i = 0; i < count; ++i) rec.values[i] = buf[i];
    } else {
      f.read(reinterpret_cast<char*>(rec.values.data()),
             static_cast<std::streamsize>(count * 8));
    }
    if (!f) throw std::runtime_error("truncated weights file " + path.string());
    recs.emplace(std::move(name), std::move(rec));
  }
  return recs;
}

// Copies every name+shape-matching parameter; unmatched model parameters
// keep their current (random) initialization and are listed in the report.
// A same-name parameter with a different shape is an error.
template <typename T>
WeightsLoadReport load_weights(SegResNet<T>& model,
                               const std::filesystem::path& path) {
  auto recs = read_weights_file(path);
  WeightsLoadReport report;
  std::map<std::string, bool> used;
  for (auto& p : model.params()) {
    auto it = recs.find(p.name);
    if (it == recs.end()) {
      report.randomly_initialized.push_back(p.name);
      continue;
    }
    if (it->second.dims != p.dims)
      throw std::runtime_error("shape mismatch for layer " + p.name);
    for (size_t i = 0; i < p.value->size(); ++i)
      (*p.value)[i] = static_cast<T>(it->second.values[i]);
    report.matched.push_back(p.name);
    used[p.name] = true;
  }
  for (const auto& [name, rec] : recs)
    if (!used.count(name)) report.ignored.push_back(name);
  return report;
}

}  // namespace fibcap

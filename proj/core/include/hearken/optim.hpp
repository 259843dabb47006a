#pragma once

#include <cmath>
#include <string>
#include <unordered_map>
#include <vector>

#include "hearken/params.hpp"

namespace hearken {

// Adam with decoupled weight decay. State is keyed by parameter name, so
// registries sharing one optimizer must use distinct name prefixes.
class AdamW {
 public:
  struct Hyper {
    double lr = 3e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
  };

  explicit AdamW(Hyper hyper) : hyper_(hyper) {}

  // One optimization step over every trainable entry of the bound
  // registries. `leaves` must come from the graph that backward() ran on.
  void step(const Graph& g, std::vector<std::pair<ParamRegistry*, const LeafMap*>> bound) {
    ++t_;
    const double bc1 = 1.0 - std::pow(hyper_.beta1, t_);
    const double bc2 = 1.0 - std::pow(hyper_.beta2, t_);
    for (auto& [reg, leaves] : bound) {
      std::size_t i = 0;
      for (auto& e : reg->entries()) {
        const Graph::NodeId leaf = leaves->ids()[i++];
        if (!e.trainable) continue;
        const Tensor& grad = g.grad(leaf);
        State& s = state(e.name, e.value);
        for (std::size_t k = 0; k < e.value.data.size(); ++k) {
          const double gk = grad.data[k];
          s.m[k] = hyper_.beta1 * s.m[k] + (1.0 - hyper_.beta1) * gk;
          s.v[k] = hyper_.beta2 * s.v[k] + (1.0 - hyper_.beta2) * gk * gk;
          const double mhat = s.m[k] / bc1;
          const double vhat = s.v[k] / bc2;
          e.value.data[k] -= hyper_.lr * (mhat / (std::sqrt(vhat) + hyper_.eps) +
                                          hyper_.weight_decay * e.value.data[k]);
        }
      }
    }
  }

  const Hyper& hyper() const { return hyper_; }

 private:
  struct State {
    std::vector<double> m, v;
  };

  State& state(const std::string& name, const Tensor& value) {
    auto it = state_.find(name);
    if (it == state_.end()) {
      State s;
      s.m.assign(value.numel(), 0.0);
      s.v.assign(value.numel(), 0.0);
      it = state_.emplace(name, std::move(s)).first;
    }
    return it->second;
  }

  Hyper hyper_;
  long t_ = 0;
  std::unordered_map<std::string, State> state_;
};

}  // namespace hearken

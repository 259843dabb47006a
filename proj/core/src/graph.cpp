#include "hearken/graph.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>

namespace hearken {

namespace {

constexpr double kInvSqrt2Pi = 0.3989422804014326779399460599343;
constexpr double kInvSqrt2 = 0.7071067811865475244008443621048;

double stable_sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Graph::NodeId Graph::push(Node node) {
  nodes_.push_back(std::move(node));
  return static_cast<NodeId>(nodes_.size() - 1);
}

Graph::Node& Graph::node(NodeId id) {
  if (id < 0 || static_cast<std::size_t>(id) >= nodes_.size()) {
    throw std::logic_error("graph: invalid node id " + std::to_string(id));
  }
  return nodes_[static_cast<std::size_t>(id)];
}

const Graph::Node& Graph::node(NodeId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= nodes_.size()) {
    throw std::logic_error("graph: invalid node id " + std::to_string(id));
  }
  return nodes_[static_cast<std::size_t>(id)];
}

Tensor& Graph::grad_buffer(NodeId id) {
  Node& n = node(id);
  if (n.grad.data.empty()) n.grad = Tensor::zeros(n.value.shape);
  return n.grad;
}

bool Graph::any_needs_grad(std::span<const NodeId> ids) const {
  for (NodeId id : ids) {
    if (node(id).needs_grad) return true;
  }
  return false;
}

const Tensor& Graph::value(NodeId id) const { return node(id).value; }

const Tensor& Graph::grad(NodeId id) const {
  const Node& n = node(id);
  if (!n.grad.data.empty()) return n.grad;
  zero_scratch_ = Tensor::zeros(n.value.shape);
  return zero_scratch_;
}

bool Graph::requires_grad(NodeId id) const { return node(id).needs_grad; }

Graph::Op Graph::op(NodeId id) const { return node(id).op; }

Graph::NodeId Graph::leaf(Tensor value, bool requires_grad) {
  check_tensor(value, "leaf");
  Node n;
  n.op = Op::kLeaf;
  n.value = std::move(value);
  n.needs_grad = requires_grad;
  return push(std::move(n));
}

Graph::NodeId Graph::add(NodeId a, NodeId b) {
  const Tensor& va = value(a);
  const Tensor& vb = value(b);
  if (!va.same_shape(vb)) {
    throw std::invalid_argument("add: shape mismatch " + va.shape_str() + " vs " + vb.shape_str());
  }
  Node n;
  n.op = Op::kAdd;
  n.inputs = {a, b};
  n.value = va;
  for (std::size_t i = 0; i < n.value.data.size(); ++i) n.value.data[i] += vb.data[i];
  n.needs_grad = any_needs_grad(n.inputs);
  n.backward = [a, b](Graph& g, NodeId self) {
    const Tensor& go = g.node(self).grad;
    for (NodeId in : {a, b}) {
      if (!g.node(in).needs_grad) continue;
      Tensor& gi = g.grad_buffer(in);
      for (std::size_t i = 0; i < go.data.size(); ++i) gi.data[i] += go.data[i];
    }
  };
  return push(std::move(n));
}

Graph::NodeId Graph::sub(NodeId a, NodeId b) {
  const Tensor& va = value(a);
  const Tensor& vb = value(b);
  if (!va.same_shape(vb)) {
    throw std::invalid_argument("sub: shape mismatch " + va.shape_str() + " vs " + vb.shape_str());
  }
  Node n;
  n.op = Op::kSub;
  n.inputs = {a, b};
  n.value = va;
  for (std::size_t i = 0; i < n.value.data.size(); ++i) n.value.data[i] -= vb.data[i];
  n.needs_grad = any_needs_grad(n.inputs);
  n.backward = [a, b](Graph& g, NodeId self) {
    const Tensor& go = g.node(self).grad;
    if (g.node(a).needs_grad) {
      Tensor& ga = g.grad_buffer(a);
      for (std::size_t i = 0; i < go.data.size(); ++i) ga.data[i] += go.data[i];
    }
    if (g.node(b).needs_grad) {
      Tensor& gb = g.grad_buffer(b);
      for (std::size_t i = 0; i < go.data.size(); ++i) gb.data[i] -= go.data[i];
    }
  };
  return push(std::move(n));
}

Graph::NodeId Graph::mul(NodeId a, NodeId b) {
  const Tensor& va = value(a);
  const Tensor& vb = value(b);
  if (!va.same_shape(vb)) {
    throw std::invalid_argument("mul: shape mismatch " + va.shape_str() + " vs " + vb.shape_str());
  }
  Node n;
  n.op = Op::kMul;
  n.inputs = {a, b};
  n.value = va;
  for (std::size_t i = 0; i < n.value.data.size(); ++i) n.value.data[i] *= vb.data[i];
  n.needs_grad = any_needs_grad(n.inputs);
  n.backward = [a, b](Graph& g, NodeId self) {
    const Tensor& go = g.node(self).grad;
    const Tensor& va = g.node(a).value;
    const Tensor& vb = g.node(b).value;
    if (g.node(a).needs_grad) {
      Tensor& ga = g.grad_buffer(a);
      for (std::size_t i = 0; i < go.data.size(); ++i) ga.data[i] += go.data[i] * vb.data[i];
    }
    if (g.node(b).needs_grad) {
      Tensor& gb = g.grad_buffer(b);
      for (std::size_t i = 0; i < go.data.size(); ++i) gb.data[i] += go.data[i] * va.data[i];
    }
  };
  return push(std::move(n));
}

Graph::NodeId Graph::add_rowvec(NodeId mat, NodeId vec) {
  const Tensor& vm = value(mat);
  const Tensor& vv = value(vec);
  if (vv.rows() != 1 || vv.cols() != vm.cols()) {
    throw std::invalid_argument("add_rowvec: vector " + vv.shape_str() + " does not broadcast over " +
                                vm.shape_str());
  }
  Node n;
  n.op = Op::kAddRowVec;
  n.inputs = {mat, vec};
  n.value = vm;
  const int rows = vm.rows(), cols = vm.cols();
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) n.value.at(r, c) += vv.data[static_cast<std::size_t>(c)];
  }
  n.needs_grad = any_needs_grad(n.inputs);
  n.backward = [mat, vec, rows, cols](Graph& g, NodeId self) {
    const Tensor& go = g.node(self).grad;
    if (g.node(mat).needs_grad) {
      Tensor& gm = g.grad_buffer(mat);
      for (std::size_t i = 0; i < go.data.size(); ++i) gm.data[i] += go.data[i];
    }
    if (g.node(vec).needs_grad) {
      Tensor& gv = g.grad_buffer(vec);
      for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) gv.data[static_cast<std::size_t>(c)] += go.at(r, c);
      }
    }
  };
  return push(std::move(n));
}

Graph::NodeId Graph::scale(NodeId x, double c) {
  Node n;
  n.op = Op::kScale;
  n.inputs = {x};
  n.value = value(x);
  for (auto& v : n.value.data) v *= c;
  n.needs_grad = any_needs_grad(n.inputs);
  n.backward = [x, c](Graph& g, NodeId self) {
    if (!g.node(x).needs_grad) return;
    const Tensor& go = g.node(self).grad;
    Tensor& gx = g.grad_buffer(x);
    for (std::size_t i = 0; i < go.data.size(); ++i) gx.data[i] += c * go.data[i];
  };
  return push(std::move(n));
}

Graph::NodeId Graph::one_minus(NodeId x) {
  Node n;
  n.op = Op::kOneMinus;
  n.inputs = {x};
  n.value = value(x);
  for (auto& v : n.value.data) v = 1.0 - v;
  n.needs_grad = any_needs_grad(n.inputs);
  n.backward = [x](Graph& g, NodeId self) {
    if (!g.node(x).needs_grad) return;
    const Tensor& go = g.node(self).grad;
    Tensor& gx = g.grad_buffer(x);
    for (std::size_t i = 0; i < go.data.size(); ++i) gx.data[i] -= go.data[i];
  };
  return push(std::move(n));
}

Graph::NodeId Graph::matmul(NodeId a, NodeId b) {
  const Tensor& va = value(a);
  const Tensor& vb = value(b);
  const int m = va.rows(), k = va.cols();
  const int k2 = vb.rows(), p = vb.cols();
  if (k != k2) {
    throw std::invalid_argument("matmul: inner dimensions differ, " + va.shape_str() + " x " +
                                vb.shape_str());
  }
  Node n;
  n.op = Op::kMatmul;
  n.inputs = {a, b};
  n.value = Tensor::zeros({m, p});
  {
    const double* A = va.data.data();
    const double* B = vb.data.data();
    double* C = n.value.data.data();
    for (int i = 0; i < m; ++i) {
      for (int t = 0; t < k; ++t) {
        const double aij = A[static_cast<std::size_t>(i) * k + t];
        const double* Brow = B + static_cast<std::size_t>(t) * p;
        double* Crow = C + static_cast<std::size_t>(i) * p;
        for (int j = 0; j < p; ++j) Crow[j] += aij * Brow[j];
      }
    }
  }
  n.needs_grad = any_needs_grad(n.inputs);
  n.backward = [a, b, m, k, p](Graph& g, NodeId self) {
    const Tensor& go = g.node(self).grad;
    const Tensor& va = g.node(a).value;
    const Tensor& vb = g.node(b).value;
    if (g.node(a).needs_grad) {
      // dA = dC * B^T
      Tensor& ga = g.grad_buffer(a);
      const double* GO = go.data.data();
      const double* B = vb.data.data();
      double* GA = ga.data.data();
      for (int i = 0; i < m; ++i) {
        for (int t = 0; t < k; ++t) {
          const double* GOrow = GO + static_cast<std::size_t>(i) * p;
          const double* Brow = B + static_cast<std::size_t>(t) * p;
          double acc = 0.0;
          for (int j = 0; j < p; ++j) acc += GOrow[j] * Brow[j];
          GA[static_cast<std::size_t>(i) * k + t] += acc;
        }
      }
    }
    if (g.node(b).needs_grad) {
      // dB = A^T * dC
      Tensor& gb = g.grad_buffer(b);
      const double* GO = go.data.data();
      const double* A = va.data.data();
      double* GB = gb.data.data();
      for (int i = 0; i < m; ++i) {
        const double* GOrow = GO + static_cast<std::size_t>(i) * p;
        for (int t = 0; t < k; ++t) {
          const double ait = A[static_cast<std::size_t>(i) * k + t];
          double* GBrow = GB + static_cast<std::size_t>(t) * p;
          for (int j = 0; j < p; ++j) GBrow[j] += ait * GOrow[j];
        }
      }
    }
  };
  return push(std::move(n));
}

Graph::NodeId Graph::transpose(NodeId x) {
  const Tensor& vx = value(x);
  const int m = vx.rows(), k = vx.cols();
  Node n;
  n.op = Op::kTranspose;
  n.inputs = {x};
  n.value = Tensor::zeros({k, m});
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < k; ++j) n.value.at(j, i) = vx.at(i, j);
  }
  n.needs_grad = any_needs_grad(n.inputs);
  n.backward = [x, m, k](Graph& g, NodeId self) {
    if (!g.node(x).needs_grad) return;
    const Tensor& go = g.node(self).grad;
    Tensor& gx = g.grad_buffer(x);
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < k; ++j) gx.at(i, j) += go.at(j, i);
    }
  };
  return push(std::move(n));
}

Graph::NodeId Graph::sigmoid(NodeId x) {
  Node n;
  n.op = Op::kSigmoid;
  n.inputs = {x};
  n.value = value(x);
  for (auto& v : n.value.data) v = stable_sigmoid(v);
  n.needs_grad = any_needs_grad(n.inputs);
  n.backward = [x](Graph& g, NodeId self) {
    if (!g.node(x).needs_grad) return;
    const Tensor& go = g.node(self).grad;
    const Tensor& y = g.node(self).value;
    Tensor& gx = g.grad_buffer(x);
    for (std::size_t i = 0; i < go.data.size(); ++i) {
      gx.data[i] += go.data[i] * y.data[i] * (1.0 - y.data[i]);
    }
  };
  return push(std::move(n));
}

Graph::NodeId Graph::gelu(NodeId x) {
  Node n;
  n.op = Op::kGelu;
  n.inputs = {x};
  n.value = value(x);
  for (auto& v : n.value.data) v = 0.5 * v * (1.0 + std::erf(v * kInvSqrt2));
  n.needs_grad = any_needs_grad(n.inputs);
  n.backward = [x](Graph& g, NodeId self) {
    if (!g.node(x).needs_grad) return;
    const Tensor& go = g.node(self).grad;
    const Tensor& vx = g.node(x).value;
    Tensor& gx = g.grad_buffer(x);
    for (std::size_t i = 0; i < go.data.size(); ++i) {
      const double v = vx.data[i];
      const double cdf = 0.5 * (1.0 + std::erf(v * kInvSqrt2));
      const double pdf = kInvSqrt2Pi * std::exp(-0.5 * v * v);
      gx.data[i] += go.data[i] * (cdf + v * pdf);
    }
  };
  return push(std::move(n));
}

Graph::NodeId Graph::layer_norm(NodeId x, NodeId gain, NodeId bias, double eps) {
  const Tensor& vx = value(x);
  const Tensor& vg = value(gain);
  const Tensor& vb = value(bias);
  const int rows = vx.rows(), d = vx.cols();
  if (d < 1 || eps <= 0.0) throw std::invalid_argument("layer_norm: need d >= 1 and eps > 0");
  if (vg.cols() != d || vg.rows() != 1 || vb.cols() != d || vb.rows() != 1) {
    throw std::invalid_argument("layer_norm: gain/bias must be length-" + std::to_string(d) +
                                " vectors");
  }
  Node n;
  n.op = Op::kLayerNorm;
  n.inputs = {x, gain, bias};
  n.value = vx;
  // cache normalized values and inverse stddev per row for backward
  auto xhat = std::make_shared<Tensor>(Tensor::zeros(vx.shape));
  auto inv_std = std::make_shared<std::vector<double>>(static_cast<std::size_t>(rows));
  for (int r = 0; r < rows; ++r) {
    double mean = 0.0;
    for (int c = 0; c < d; ++c) mean += vx.at(r, c);
    mean /= d;
    double var = 0.0;
    for (int c = 0; c < d; ++c) {
      const double dv = vx.at(r, c) - mean;
      var += dv * dv;
    }
    var /= d;
    const double istd = 1.0 / std::sqrt(var + eps);
    (*inv_std)[static_cast<std::size_t>(r)] = istd;
    for (int c = 0; c < d; ++c) {
      const double h = (vx.at(r, c) - mean) * istd;
      xhat->at(r, c) = h;
      n.value.at(r, c) = h * vg.data[static_cast<std::size_t>(c)] + vb.data[static_cast<std::size_t>(c)];
    }
  }
  n.needs_grad = any_needs_grad(n.inputs);
  n.backward = [x, gain, bias, rows, d, xhat, inv_std](Graph& g, NodeId self) {
    const Tensor& go = g.node(self).grad;
    const Tensor& vg = g.node(gain).value;
    if (g.node(gain).needs_grad) {
      Tensor& gg = g.grad_buffer(gain);
      for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < d; ++c) gg.data[static_cast<std::size_t>(c)] += go.at(r, c) * xhat->at(r, c);
      }
    }
    if (g.node(bias).needs_grad) {
      Tensor& gb = g.grad_buffer(bias);
      for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < d; ++c) gb.data[static_cast<std::size_t>(c)] += go.at(r, c);
      }
    }
    if (g.node(x).needs_grad) {
      Tensor& gx = g.grad_buffer(x);
      for (int r = 0; r < rows; ++r) {
        double sum_dy = 0.0, sum_dy_xhat = 0.0;
        for (int c = 0; c < d; ++c) {
          const double dy = go.at(r, c) * vg.data[static_cast<std::size_t>(c)];
          sum_dy += dy;
          sum_dy_xhat += dy * xhat->at(r, c);
        }
        const double istd = (*inv_std)[static_cast<std::size_t>(r)];
        for (int c = 0; c < d; ++c) {
          const double dy = go.at(r, c) * vg.data[static_cast<std::size_t>(c)];
          gx.at(r, c) += istd * (dy - sum_dy / d - xhat->at(r, c) * sum_dy_xhat / d);
        }
      }
    }
  };
  return push(std::move(n));
}

Graph::NodeId Graph::softmax_rows(NodeId x) {
  const Tensor& vx = value(x);
  const int rows = vx.rows(), d = vx.cols();
  Node n;
  n.op = Op::kSoftmaxRows;
  n.inputs = {x};
  n.value = vx;
  for (int r = 0; r < rows; ++r) {
    double mx = n.value.at(r, 0);
    for (int c = 1; c < d; ++c) mx = std::max(mx, n.value.at(r, c));
    double denom = 0.0;
    for (int c = 0; c < d; ++c) {
      const double e = std::exp(n.value.at(r, c) - mx);
      n.value.at(r, c) = e;
      denom += e;
    }
    for (int c = 0; c < d; ++c) n.value.at(r, c) /= denom;
  }
  n.needs_grad = any_needs_grad(n.inputs);
  n.backward = [x, rows, d](Graph& g, NodeId self) {
    if (!g.node(x).needs_grad) return;
    const Tensor& go = g.node(self).grad;
    const Tensor& y = g.node(self).value;
    Tensor& gx = g.grad_buffer(x);
    for (int r = 0; r < rows; ++r) {
      double dot = 0.0;
      for (int c = 0; c < d; ++c) dot += go.at(r, c) * y.at(r, c);
      for (int c = 0; c < d; ++c) gx.at(r, c) += y.at(r, c) * (go.at(r, c) - dot);
    }
  };
  return push(std::move(n));
}

Graph::NodeId Graph::cross_entropy(NodeId logits, const std::vector<int>& labels) {
  const Tensor& vl = value(logits);
  const int rows = vl.rows(), classes = vl.cols();
  if (static_cast<int>(labels.size()) != rows) {
    throw std::invalid_argument("cross_entropy: " + std::to_string(labels.size()) +
                                " labels for " + std::to_string(rows) + " rows");
  }
  for (int lab : labels) {
    if (lab < 0 || lab >= classes) {
      throw std::out_of_range("cross_entropy: label " + std::to_string(lab) +
                              " outside [0, " + std::to_string(classes) + ")");
    }
  }
  Node n;
  n.op = Op::kCrossEntropy;
  n.inputs = {logits};
  auto probs = std::make_shared<Tensor>(vl);
  double loss = 0.0;
  for (int r = 0; r < rows; ++r) {
    double mx = probs->at(r, 0);
    for (int c = 1; c < classes; ++c) mx = std::max(mx, probs->at(r, c));
    double denom = 0.0;
    for (int c = 0; c < classes; ++c) {
      const double e = std::exp(probs->at(r, c) - mx);
      probs->at(r, c) = e;
      denom += e;
    }
    for (int c = 0; c < classes; ++c) probs->at(r, c) /= denom;
    loss -= std::log(probs->at(r, labels[static_cast<std::size_t>(r)]));
  }
  n.value = Tensor::scalar(loss / rows);
  n.needs_grad = any_needs_grad(n.inputs);
  auto labs = std::make_shared<std::vector<int>>(labels);
  n.backward = [logits, rows, classes, probs, labs](Graph& g, NodeId self) {
    if (!g.node(logits).needs_grad) return;
    const double go = g.node(self).grad.data[0];
    Tensor& gx = g.grad_buffer(logits);
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < classes; ++c) {
        const double onehot = (c == (*labs)[static_cast<std::size_t>(r)]) ? 1.0 : 0.0;
        gx.at(r, c) += go * (probs->at(r, c) - onehot) / rows;
      }
    }
  };
  return push(std::move(n));
}

Graph::NodeId Graph::bce_with_logits(NodeId logits, const std::vector<double>& targets) {
  const Tensor& vl = value(logits);
  if (targets.size() != vl.numel()) {
    throw std::invalid_argument("bce_with_logits: target count mismatch");
  }
  Node n;
  n.op = Op::kBceWithLogits;
  n.inputs = {logits};
  const std::size_t count = vl.numel();
  double loss = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    const double z = vl.data[i];
    const double y = targets[i];
    loss += std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
  }
  n.value = Tensor::scalar(loss / static_cast<double>(count));
  n.needs_grad = any_needs_grad(n.inputs);
  auto targ = std::make_shared<std::vector<double>>(targets);
  n.backward = [logits, count, targ](Graph& g, NodeId self) {
    if (!g.node(logits).needs_grad) return;
    const double go = g.node(self).grad.data[0];
    const Tensor& vl = g.node(logits).value;
    Tensor& gx = g.grad_buffer(logits);
    for (std::size_t i = 0; i < count; ++i) {
      gx.data[i] += go * (stable_sigmoid(vl.data[i]) - (*targ)[i]) / static_cast<double>(count);
    }
  };
  return push(std::move(n));
}

Graph::NodeId Graph::slice_rows(NodeId x, int r0, int r1) {
  const Tensor& vx = value(x);
  const int rows = vx.rows(), cols = vx.cols();
  if (r0 < 0 || r1 > rows || r0 >= r1) {
    throw std::out_of_range("slice_rows: [" + std::to_string(r0) + ", " + std::to_string(r1) +
                            ") outside " + vx.shape_str());
  }
  Node n;
  n.op = Op::kSliceRows;
  n.inputs = {x};
  n.value = Tensor::zeros({r1 - r0, cols});
  std::copy(vx.data.begin() + static_cast<std::ptrdiff_t>(r0) * cols,
            vx.data.begin() + static_cast<std::ptrdiff_t>(r1) * cols, n.value.data.begin());
  n.needs_grad = any_needs_grad(n.inputs);
  n.backward = [x, r0, cols](Graph& g, NodeId self) {
    if (!g.node(x).needs_grad) return;
    const Tensor& go = g.node(self).grad;
    Tensor& gx = g.grad_buffer(x);
    const std::size_t offset = static_cast<std::size_t>(r0) * cols;
    for (std::size_t i = 0; i < go.data.size(); ++i) gx.data[offset + i] += go.data[i];
  };
  return push(std::move(n));
}

Graph::NodeId Graph::paste_rows(NodeId base, NodeId patch, int r0) {
  const Tensor& vb = value(base);
  const Tensor& vp = value(patch);
  const int rows = vb.rows(), cols = vb.cols();
  const int prows = vp.rows();
  if (vp.cols() != cols || r0 < 0 || r0 + prows > rows) {
    throw std::out_of_range("paste_rows: patch " + vp.shape_str() + " at row " +
                            std::to_string(r0) + " does not fit " + vb.shape_str());
  }
  Node n;
  n.op = Op::kPasteRows;
  n.inputs = {base, patch};
  n.value = vb;
  std::copy(vp.data.begin(), vp.data.end(),
            n.value.data.begin() + static_cast<std::ptrdiff_t>(r0) * cols);
  n.needs_grad = any_needs_grad(n.inputs);
  n.backward = [base, patch, r0, prows, cols](Graph& g, NodeId self) {
    const Tensor& go = g.node(self).grad;
    const std::size_t offset = static_cast<std::size_t>(r0) * cols;
    const std::size_t patch_len = static_cast<std::size_t>(prows) * cols;
    if (g.node(base).needs_grad) {
      Tensor& gb = g.grad_buffer(base);
      for (std::size_t i = 0; i < go.data.size(); ++i) {
        if (i >= offset && i < offset + patch_len) continue;  // overwritten rows
        gb.data[i] += go.data[i];
      }
    }
    if (g.node(patch).needs_grad) {
      Tensor& gp = g.grad_buffer(patch);
      for (std::size_t i = 0; i < patch_len; ++i) gp.data[i] += go.data[offset + i];
    }
  };
  return push(std::move(n));
}

Graph::NodeId Graph::slice_cols(NodeId x, int c0, int c1) {
  const Tensor& vx = value(x);
  const int rows = vx.rows(), cols = vx.cols();
  if (c0 < 0 || c1 > cols || c0 >= c1) {
    throw std::out_of_range("slice_cols: [" + std::to_string(c0) + ", " + std::to_string(c1) +
                            ") outside " + vx.shape_str());
  }
  Node n;
  n.op = Op::kSliceCols;
  n.inputs = {x};
  const int w = c1 - c0;
  n.value = Tensor::zeros({rows, w});
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < w; ++c) n.value.at(r, c) = vx.at(r, c0 + c);
  }
  n.needs_grad = any_needs_grad(n.inputs);
  n.backward = [x, rows, c0, w](Graph& g, NodeId self) {
    if (!g.node(x).needs_grad) return;
    const Tensor& go = g.node(self).grad;
    Tensor& gx = g.grad_buffer(x);
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < w; ++c) gx.at(r, c0 + c) += go.at(r, c);
    }
  };
  return push(std::move(n));
}

Graph::NodeId Graph::concat_cols(std::span<const NodeId> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: no parts");
  const int rows = value(parts[0]).rows();
  int total = 0;
  for (NodeId p : parts) {
    if (value(p).rows() != rows) throw std::invalid_argument("concat_cols: row count mismatch");
    total += value(p).cols();
  }
  Node n;
  n.op = Op::kConcatCols;
  n.inputs.assign(parts.begin(), parts.end());
  n.value = Tensor::zeros({rows, total});
  int base = 0;
  for (NodeId p : parts) {
    const Tensor& vp = value(p);
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < vp.cols(); ++c) n.value.at(r, base + c) = vp.at(r, c);
    }
    base += vp.cols();
  }
  n.needs_grad = any_needs_grad(n.inputs);
  std::vector<NodeId> ins(parts.begin(), parts.end());
  n.backward = [ins, rows](Graph& g, NodeId self) {
    const Tensor& go = g.node(self).grad;
    int base = 0;
    for (NodeId p : ins) {
      const int w = g.node(p).value.cols();
      if (g.node(p).needs_grad) {
        Tensor& gp = g.grad_buffer(p);
        for (int r = 0; r < rows; ++r) {
          for (int c = 0; c < w; ++c) gp.at(r, c) += go.at(r, base + c);
        }
      }
      base += w;
    }
  };
  return push(std::move(n));
}

Graph::NodeId Graph::gather_rows(NodeId table, const std::vector<int>& indices) {
  const Tensor& vt = value(table);
  const int rows = vt.rows(), cols = vt.cols();
  if (indices.empty()) throw std::invalid_argument("gather_rows: empty index list");
  for (int idx : indices) {
    if (idx < 0 || idx >= rows) {
      throw std::out_of_range("gather_rows: index " + std::to_string(idx) + " outside [0, " +
                              std::to_string(rows) + ")");
    }
  }
  Node n;
  n.op = Op::kGatherRows;
  n.inputs = {table};
  n.value = Tensor::zeros({static_cast<int>(indices.size()), cols});
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const double* src = vt.data.data() + static_cast<std::size_t>(indices[r]) * cols;
    std::copy(src, src + cols, n.value.data.data() + r * cols);
  }
  n.needs_grad = any_needs_grad(n.inputs);
  auto idx = std::make_shared<std::vector<int>>(indices);
  n.backward = [table, cols, idx](Graph& g, NodeId self) {
    if (!g.node(table).needs_grad) return;
    const Tensor& go = g.node(self).grad;
    Tensor& gt = g.grad_buffer(table);
    for (std::size_t r = 0; r < idx->size(); ++r) {
      double* dst = gt.data.data() + static_cast<std::size_t>((*idx)[r]) * cols;
      const double* src = go.data.data() + r * cols;
      for (int c = 0; c < cols; ++c) dst[c] += src[c];
    }
  };
  return push(std::move(n));
}

Graph::NodeId Graph::mean_pool_rows(NodeId x, int n_groups) {
  const Tensor& vx = value(x);
  const int rows = vx.rows(), cols = vx.cols();
  if (n_groups < 1 || n_groups > rows) {
    throw std::invalid_argument("mean_pool_rows: cannot pool " + std::to_string(rows) +
                                " rows into " + std::to_string(n_groups) + " groups");
  }
  Node n;
  n.op = Op::kMeanPoolRows;
  n.inputs = {x};
  n.value = Tensor::zeros({n_groups, cols});
  for (int grp = 0; grp < n_groups; ++grp) {
    const int lo = grp * rows / n_groups;
    const int hi = (grp + 1) * rows / n_groups;
    for (int r = lo; r < hi; ++r) {
      for (int c = 0; c < cols; ++c) n.value.at(grp, c) += vx.at(r, c);
    }
    for (int c = 0; c < cols; ++c) n.value.at(grp, c) /= (hi - lo);
  }
  n.needs_grad = any_needs_grad(n.inputs);
  n.backward = [x, rows, cols, n_groups](Graph& g, NodeId self) {
    if (!g.node(x).needs_grad) return;
    const Tensor& go = g.node(self).grad;
    Tensor& gx = g.grad_buffer(x);
    for (int grp = 0; grp < n_groups; ++grp) {
      const int lo = grp * rows / n_groups;
      const int hi = (grp + 1) * rows / n_groups;
      for (int r = lo; r < hi; ++r) {
        for (int c = 0; c < cols; ++c) gx.at(r, c) += go.at(grp, c) / (hi - lo);
      }
    }
  };
  return push(std::move(n));
}

Graph::NodeId Graph::add_n(std::span<const NodeId> terms) {
  if (terms.empty()) throw std::invalid_argument("add_n: no terms");
  const Tensor& first = value(terms[0]);
  for (NodeId t : terms) {
    if (!value(t).same_shape(first)) throw std::invalid_argument("add_n: shape mismatch");
  }
  Node n;
  n.op = Op::kAddN;
  n.inputs.assign(terms.begin(), terms.end());
  n.value = first;
  for (std::size_t t = 1; t < terms.size(); ++t) {
    const Tensor& vt = value(terms[t]);
    for (std::size_t i = 0; i < n.value.data.size(); ++i) n.value.data[i] += vt.data[i];
  }
  n.needs_grad = any_needs_grad(n.inputs);
  std::vector<NodeId> ins(terms.begin(), terms.end());
  n.backward = [ins](Graph& g, NodeId self) {
    const Tensor& go = g.node(self).grad;
    for (NodeId t : ins) {
      if (!g.node(t).needs_grad) continue;
      Tensor& gt = g.grad_buffer(t);
      for (std::size_t i = 0; i < go.data.size(); ++i) gt.data[i] += go.data[i];
    }
  };
  return push(std::move(n));
}

void Graph::backward(NodeId loss) {
  const Node& ln = node(loss);
  if (!ln.value.is_scalar()) {
    throw std::logic_error("backward: loss must be scalar, got " + ln.value.shape_str());
  }
  grad_buffer(loss).data[0] = 1.0;
  for (NodeId id = loss; id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.needs_grad || n.grad.data.empty() || !n.backward) continue;
    n.backward(*this, id);
  }
}

}  // namespace hearken

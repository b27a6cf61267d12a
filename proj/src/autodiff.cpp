#include "vseg/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "vseg/error.hpp"

namespace vseg::ad {

namespace {

constexpr double kEps = 1e-12;

// Valid output range [first, last) for one kernel offset, hoisting the
// input-bounds check out of the conv inner loops:
//   in = out*stride - pad + k_off  must satisfy  0 <= in < in_size.
inline int first_valid(int k_off, int pad, int stride) {
  int num = pad - k_off;
  if (num <= 0) return 0;
  return (num + stride - 1) / stride;
}
inline int last_valid_excl(int k_off, int pad, int stride, int in_size, int out_size) {
  int num = in_size - 1 + pad - k_off;
  if (num < 0) return 0;
  return std::min(out_size, num / stride + 1);
}

}  // namespace

VarPtr make_leaf(Tensor v, bool requires_grad) {
  return std::make_shared<Var>(std::move(v), requires_grad);
}

std::vector<double> bilinear_kernel_1d(int factor) {
  if (factor < 1) throw structural_error("bilinear kernel factor must be >= 1");
  int k = 2 * factor;
  double c = (2.0 * factor - 1 - factor % 2) / (2.0 * factor);
  std::vector<double> w(k);
  for (int i = 0; i < k; ++i) w[i] = 1.0 - std::abs(i / static_cast<double>(factor) - c);
  return w;
}

double sigmoid_scalar(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  double e = std::exp(z);
  return e / (1.0 + e);
}

BceWeights bce_weights(const Tensor& truth, const Tensor& region) {
  if (!truth.same_shape(region)) throw structural_error("truth/region shape mismatch");
  BceWeights bw;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (region.v[i] <= 0.5) continue;
    ++bw.n;
    if (truth.v[i] > 0.5)
      ++bw.n_pos;
    else
      ++bw.n_neg;
  }
  if (bw.n == 0) throw structural_error("empty loss region");
  bw.pos_weight = static_cast<double>(bw.n_neg) / static_cast<double>(bw.n);
  bw.neg_weight = static_cast<double>(bw.n_pos) / static_cast<double>(bw.n);
  return bw;
}

double bce_loss_value(const Tensor& prob, const Tensor& truth, const Tensor& region,
                      const BceWeights& bw) {
  if (!prob.same_shape(truth) || !prob.same_shape(region))
    throw structural_error("prob/truth/region shape mismatch");
  double pos_term = 0.0, neg_term = 0.0;
  for (std::size_t i = 0; i < prob.size(); ++i) {
    if (region.v[i] <= 0.5) continue;
    double p = std::min(std::max(prob.v[i], kEps), 1.0 - kEps);
    if (truth.v[i] > 0.5)
      pos_term += std::log(p);
    else
      neg_term += std::log(1.0 - p);
  }
  return -bw.pos_weight * pos_term - bw.neg_weight * neg_term;
}

void Tape::backward(const VarPtr& root) {
  std::fill(root->grad.v.begin(), root->grad.v.end(), 1.0);
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
}

VarPtr Tape::conv2d(const VarPtr& x, const VarPtr& w, const VarPtr& b, int stride,
                    int pad) {
  int k = 0;
  while (k * k < w->value.w) ++k;
  if (k * k != w->value.w) throw structural_error("conv kernel table is not square");
  if (stride < 1 || pad < 0) throw structural_error("bad conv stride/pad");
  const int ic = w->value.h, oc = w->value.c;
  if (x->value.c != ic) throw structural_error("conv input channel mismatch");
  if (b->value.c != oc || b->value.h != 1 || b->value.w != 1)
    throw structural_error("conv bias shape mismatch");
  const int ih = x->value.h, iw = x->value.w;
  if (ih + 2 * pad < k || iw + 2 * pad < k)
    throw structural_error("conv input smaller than kernel");
  const int oh = (ih + 2 * pad - k) / stride + 1;
  const int ow = (iw + 2 * pad - k) / stride + 1;

  Tensor res(oc, oh, ow);
  for (int o = 0; o < oc; ++o) {
    double* op = res.plane(o);
    const double bias = b->value.at(o, 0, 0);
    for (std::size_t i = 0; i < res.plane_size(); ++i) op[i] = bias;
    for (int i = 0; i < ic; ++i) {
      const double* xp = x->value.plane(i);
      const double* wp = &w->value.at(o, i, 0);
      for (int ky = 0; ky < k; ++ky) {
        const int oy0 = first_valid(ky, pad, stride);
        const int oy1 = last_valid_excl(ky, pad, stride, ih, oh);
        for (int kx = 0; kx < k; ++kx) {
          const double wv = wp[ky * k + kx];
          const int ox0 = first_valid(kx, pad, stride);
          const int ox1 = last_valid_excl(kx, pad, stride, iw, ow);
          for (int oy = oy0; oy < oy1; ++oy) {
            const double* xrow = xp + (oy * stride - pad + ky) * iw - pad + kx;
            double* orow = op + oy * ow;
            for (int ox = ox0; ox < ox1; ++ox) orow[ox] += wv * xrow[ox * stride];
          }
        }
      }
    }
  }

  const bool needs = track_ && (x->needs || w->needs || b->needs);
  auto out = std::make_shared<Var>(std::move(res), needs);
  if (needs) {
    VarPtr xc = x, wc = w, bc = b;
    nodes_.push_back([out, xc, wc, bc, stride, pad, k, ic, oc, ih, iw, oh, ow]() {
      if (bc->needs) {
        for (int o = 0; o < oc; ++o) {
          const double* dop = out->grad.plane(o);
          double acc = 0.0;
          for (std::size_t i = 0; i < out->grad.plane_size(); ++i) acc += dop[i];
          bc->grad.at(o, 0, 0) += acc;
        }
      }
      for (int o = 0; o < oc; ++o) {
        const double* dop = out->grad.plane(o);
        for (int i = 0; i < ic; ++i) {
          const double* xp = xc->value.plane(i);
          double* dxp = xc->grad.plane(i);
          const double* wp = &wc->value.at(o, i, 0);
          double* dwp = &wc->grad.at(o, i, 0);
          for (int ky = 0; ky < k; ++ky) {
            const int oy0 = first_valid(ky, pad, stride);
            const int oy1 = last_valid_excl(ky, pad, stride, ih, oh);
            for (int kx = 0; kx < k; ++kx) {
              const double wv = wp[ky * k + kx];
              const int ox0 = first_valid(kx, pad, stride);
              const int ox1 = last_valid_excl(kx, pad, stride, iw, ow);
              double acc = 0.0;
              for (int oy = oy0; oy < oy1; ++oy) {
                const std::ptrdiff_t base = (oy * stride - pad + ky) * iw - pad + kx;
                const double* xrow = xp + base;
                const double* dorow = dop + oy * ow;
                if (xc->needs) {
                  double* dxrow = dxp + base;
                  for (int ox = ox0; ox < ox1; ++ox) {
                    const double g = dorow[ox];
                    acc += g * xrow[ox * stride];
                    dxrow[ox * stride] += wv * g;
                  }
                } else {
                  for (int ox = ox0; ox < ox1; ++ox) acc += dorow[ox] * xrow[ox * stride];
                }
              }
              if (wc->needs) dwp[ky * k + kx] += acc;
            }
          }
        }
      }
    });
  }
  return out;
}

VarPtr Tape::relu(const VarPtr& x) {
  Tensor res = x->value;
  for (double& v : res.v) v = v > 0.0 ? v : 0.0;
  const bool needs = track_ && x->needs;
  auto out = std::make_shared<Var>(std::move(res), needs);
  if (needs) {
    VarPtr xc = x;
    nodes_.push_back([out, xc]() {
      for (std::size_t i = 0; i < xc->grad.size(); ++i)
        if (xc->value.v[i] > 0.0) xc->grad.v[i] += out->grad.v[i];
    });
  }
  return out;
}

VarPtr Tape::maxpool2(const VarPtr& x) {
  const int c = x->value.c, ih = x->value.h, iw = x->value.w;
  const int oh = (ih + 1) / 2, ow = (iw + 1) / 2;
  Tensor res(c, oh, ow);
  // Flat per-plane index of each window maximum, first hit wins on ties.
  auto arg = std::make_shared<std::vector<int>>(static_cast<std::size_t>(c) * oh * ow);
  for (int ci = 0; ci < c; ++ci) {
    const double* xp = x->value.plane(ci);
    double* op = res.plane(ci);
    int* ap = arg->data() + static_cast<std::size_t>(ci) * oh * ow;
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        const int y1 = std::min(2 * oy + 2, ih), x1 = std::min(2 * ox + 2, iw);
        int best_at = 2 * oy * iw + 2 * ox;
        double best = xp[best_at];
        for (int y = 2 * oy; y < y1; ++y)
          for (int xi = 2 * ox; xi < x1; ++xi)
            if (xp[y * iw + xi] > best) {
              best = xp[y * iw + xi];
              best_at = y * iw + xi;
            }
        op[oy * ow + ox] = best;
        ap[oy * ow + ox] = best_at;
      }
    }
  }
  const bool needs = track_ && x->needs;
  auto out = std::make_shared<Var>(std::move(res), needs);
  if (needs) {
    VarPtr xc = x;
    nodes_.push_back([out, xc, arg, c, oh, ow]() {
      for (int ci = 0; ci < c; ++ci) {
        double* dxp = xc->grad.plane(ci);
        const double* dop = out->grad.plane(ci);
        const int* ap = arg->data() + static_cast<std::size_t>(ci) * oh * ow;
        for (int i = 0; i < oh * ow; ++i) dxp[ap[i]] += dop[i];
      }
    });
  }
  return out;
}

VarPtr Tape::upsample_bilinear(const VarPtr& x, int factor, int out_h, int out_w) {
  if (factor < 2) throw structural_error("upsample factor must be >= 2");
  const int c = x->value.c, ih = x->value.h, iw = x->value.w;
  const int full_h = ih * factor, full_w = iw * factor;
  if (out_h < 1 || out_w < 1 || out_h > full_h || out_w > full_w)
    throw structural_error("upsample target outside producible range");
  const int k = 2 * factor, pad = factor / 2;
  const std::vector<double> k1 = bilinear_kernel_1d(factor);
  auto k2 = std::make_shared<std::vector<double>>(static_cast<std::size_t>(k) * k);
  for (int ky = 0; ky < k; ++ky)
    for (int kx = 0; kx < k; ++kx) (*k2)[ky * k + kx] = k1[ky] * k1[kx];

  Tensor res(c, out_h, out_w);
  for (int ci = 0; ci < c; ++ci) {
    const double* xp = x->value.plane(ci);
    double* op = res.plane(ci);
    for (int iy = 0; iy < ih; ++iy) {
      for (int ix = 0; ix < iw; ++ix) {
        const double v = xp[iy * iw + ix];
        if (v == 0.0) continue;
        for (int ky = 0; ky < k; ++ky) {
          const int oy = iy * factor - pad + ky;
          if (oy < 0 || oy >= out_h) continue;
          for (int kx = 0; kx < k; ++kx) {
            const int ox = ix * factor - pad + kx;
            if (ox < 0 || ox >= out_w) continue;
            op[oy * out_w + ox] += v * (*k2)[ky * k + kx];
          }
        }
      }
    }
  }
  const bool needs = track_ && x->needs;
  auto out = std::make_shared<Var>(std::move(res), needs);
  if (needs) {
    VarPtr xc = x;
    nodes_.push_back([out, xc, k2, factor, out_h, out_w, k, pad, c, ih, iw]() {
      for (int ci = 0; ci < c; ++ci) {
        double* dxp = xc->grad.plane(ci);
        const double* dop = out->grad.plane(ci);
        for (int iy = 0; iy < ih; ++iy) {
          for (int ix = 0; ix < iw; ++ix) {
            double acc = 0.0;
            for (int ky = 0; ky < k; ++ky) {
              const int oy = iy * factor - pad + ky;
              if (oy < 0 || oy >= out_h) continue;
              for (int kx = 0; kx < k; ++kx) {
                const int ox = ix * factor - pad + kx;
                if (ox < 0 || ox >= out_w) continue;
                acc += dop[oy * out_w + ox] * (*k2)[ky * k + kx];
              }
            }
            dxp[iy * iw + ix] += acc;
          }
        }
      }
    });
  }
  return out;
}

VarPtr Tape::concat(const std::vector<VarPtr>& xs) {
  if (xs.empty()) throw structural_error("concat of nothing");
  const int h = xs[0]->value.h, w = xs[0]->value.w;
  int c = 0;
  bool needs = false;
  for (const auto& x : xs) {
    if (x->value.h != h || x->value.w != w)
      throw structural_error("concat spatial shape mismatch");
    c += x->value.c;
    needs = needs || x->needs;
  }
  needs = needs && track_;
  Tensor res(c, h, w);
  int at = 0;
  for (const auto& x : xs) {
    std::copy(x->value.v.begin(), x->value.v.end(), res.plane(at));
    at += x->value.c;
  }
  auto out = std::make_shared<Var>(std::move(res), needs);
  if (needs) {
    std::vector<VarPtr> ins = xs;
    nodes_.push_back([out, ins]() {
      int at = 0;
      for (const auto& x : ins) {
        if (x->needs) {
          const double* dop = out->grad.plane(at);
          for (std::size_t i = 0; i < x->grad.size(); ++i) x->grad.v[i] += dop[i];
        }
        at += x->value.c;
      }
    });
  }
  return out;
}

VarPtr Tape::add(const VarPtr& a, const VarPtr& b) {
  if (!a->value.same_shape(b->value)) throw structural_error("add shape mismatch");
  Tensor res = a->value;
  for (std::size_t i = 0; i < res.size(); ++i) res.v[i] += b->value.v[i];
  const bool needs = track_ && (a->needs || b->needs);
  auto out = std::make_shared<Var>(std::move(res), needs);
  if (needs) {
    VarPtr ac = a, bc = b;
    nodes_.push_back([out, ac, bc]() {
      if (ac->needs)
        for (std::size_t i = 0; i < ac->grad.size(); ++i) ac->grad.v[i] += out->grad.v[i];
      if (bc->needs)
        for (std::size_t i = 0; i < bc->grad.size(); ++i) bc->grad.v[i] += out->grad.v[i];
    });
  }
  return out;
}

VarPtr Tape::weighted_sum(const std::vector<VarPtr>& xs, const VarPtr& h) {
  const int m = static_cast<int>(xs.size());
  if (m == 0) throw structural_error("weighted_sum of nothing");
  if (h->value.c != m || h->value.h != 1 || h->value.w != 1)
    throw structural_error("fusion weight count mismatch");
  bool needs = h->needs;
  for (const auto& x : xs) {
    if (!x->value.same_shape(xs[0]->value))
      throw structural_error("weighted_sum shape mismatch");
    needs = needs || x->needs;
  }
  needs = needs && track_;
  Tensor res(xs[0]->value.c, xs[0]->value.h, xs[0]->value.w);
  for (int mi = 0; mi < m; ++mi) {
    const double hv = h->value.v[mi];
    for (std::size_t i = 0; i < res.size(); ++i) res.v[i] += hv * xs[mi]->value.v[i];
  }
  auto out = std::make_shared<Var>(std::move(res), needs);
  if (needs) {
    std::vector<VarPtr> ins = xs;
    VarPtr hc = h;
    nodes_.push_back([out, ins, hc, m]() {
      for (int mi = 0; mi < m; ++mi) {
        const auto& x = ins[mi];
        if (hc->needs) {
          double acc = 0.0;
          for (std::size_t i = 0; i < x->value.size(); ++i)
            acc += out->grad.v[i] * x->value.v[i];
          hc->grad.v[mi] += acc;
        }
        if (x->needs) {
          const double hv = hc->value.v[mi];
          for (std::size_t i = 0; i < x->grad.size(); ++i)
            x->grad.v[i] += hv * out->grad.v[i];
        }
      }
    });
  }
  return out;
}

VarPtr Tape::sigmoid(const VarPtr& x) {
  Tensor res = x->value;
  for (double& v : res.v) v = sigmoid_scalar(v);
  const bool needs = track_ && x->needs;
  auto out = std::make_shared<Var>(std::move(res), needs);
  if (needs) {
    VarPtr xc = x;
    nodes_.push_back([out, xc]() {
      for (std::size_t i = 0; i < xc->grad.size(); ++i) {
        const double p = out->value.v[i];
        xc->grad.v[i] += p * (1.0 - p) * out->grad.v[i];
      }
    });
  }
  return out;
}

VarPtr Tape::shift(const VarPtr& x, double delta) {
  Tensor res = x->value;
  for (double& v : res.v) v += delta;
  const bool needs = track_ && x->needs;
  auto out = std::make_shared<Var>(std::move(res), needs);
  if (needs) {
    VarPtr xc = x;
    nodes_.push_back([out, xc]() {
      for (std::size_t i = 0; i < xc->grad.size(); ++i)
        xc->grad.v[i] += out->grad.v[i];
    });
  }
  return out;
}

VarPtr Tape::scale(const VarPtr& x, double alpha) {
  Tensor res = x->value;
  for (double& v : res.v) v *= alpha;
  const bool needs = track_ && x->needs;
  auto out = std::make_shared<Var>(std::move(res), needs);
  if (needs) {
    VarPtr xc = x;
    nodes_.push_back([out, xc, alpha]() {
      for (std::size_t i = 0; i < xc->grad.size(); ++i)
        xc->grad.v[i] += alpha * out->grad.v[i];
    });
  }
  return out;
}

VarPtr Tape::sum(const VarPtr& x) {
  Tensor res(1, 1, 1);
  for (double v : x->value.v) res.v[0] += v;
  const bool needs = track_ && x->needs;
  auto out = std::make_shared<Var>(std::move(res), needs);
  if (needs) {
    VarPtr xc = x;
    nodes_.push_back([out, xc]() {
      const double g = out->grad.v[0];
      for (double& d : xc->grad.v) d += g;
    });
  }
  return out;
}

VarPtr Tape::balanced_bce(const VarPtr& logit, const Tensor& truth, const Tensor& region) {
  if (!logit->value.same_shape(truth) || !logit->value.same_shape(region))
    throw structural_error("balanced_bce shape mismatch");
  const BceWeights bw = bce_weights(truth, region);
  auto prob = std::make_shared<Tensor>(logit->value);
  for (double& v : prob->v) v = sigmoid_scalar(v);
  Tensor res(1, 1, 1);
  res.v[0] = bce_loss_value(*prob, truth, region, bw);
  const bool needs = track_ && logit->needs;
  auto out = std::make_shared<Var>(std::move(res), needs);
  if (needs) {
    VarPtr lc = logit;
    auto tr = std::make_shared<Tensor>(truth);
    auto rg = std::make_shared<Tensor>(region);
    nodes_.push_back([out, lc, prob, tr, rg, bw]() {
      const double g = out->grad.v[0];
      for (std::size_t i = 0; i < lc->grad.size(); ++i) {
        if (rg->v[i] <= 0.5) continue;
        const double p = prob->v[i];
        const double dz = tr->v[i] > 0.5 ? bw.pos_weight * (p - 1.0) : bw.neg_weight * p;
        lc->grad.v[i] += g * dz;
      }
    });
  }
  return out;
}

}  // namespace vseg::ad

#include "cmtssl/nn.hpp"

#include <algorithm>
#include <cmath>

#include "cmtssl/errors.hpp"
#include "cmtssl/losses.hpp"

namespace cmtssl::nn {

int ParamStore::add(std::string name, std::vector<int> shape) {
  if (find(name) >= 0) throw ConfigError("duplicate parameter name: " + name);
  Parameter p;
  p.name = std::move(name);
  p.value = Tensor(shape);
  p.m = Tensor(shape);
  p.v = Tensor(shape);
  params_.push_back(std::move(p));
  return static_cast<int>(params_.size()) - 1;
}

int ParamStore::find(const std::string& name) const {
  for (std::size_t i = 0; i < params_.size(); ++i)
    if (params_[i].name == name) return static_cast<int>(i);
  return -1;
}

std::size_t ParamStore::total_elements() const {
  std::size_t n = 0;
  for (const Parameter& p : params_) n += p.value.size();
  return n;
}

void GradBuffer::resize_for(const ParamStore& store) {
  grads.assign(static_cast<std::size_t>(store.count()), Tensor());
  touched.assign(static_cast<std::size_t>(store.count()), 0);
}

void GradBuffer::accumulate(int id, const Tensor& g) {
  Tensor& slot = grads[static_cast<std::size_t>(id)];
  if (slot.empty()) {
    slot = g;
  } else {
    double* d = slot.data();
    const double* s = g.data();
    for (std::size_t i = 0; i < slot.size(); ++i) d[i] += s[i];
  }
  touched[static_cast<std::size_t>(id)] = 1;
}

void GradBuffer::add_scaled(const GradBuffer& other, double scale) {
  for (std::size_t i = 0; i < other.grads.size(); ++i) {
    if (!other.touched[i]) continue;
    if (!touched[i]) {
      grads[i] = Tensor(other.grads[i].shape());
      touched[i] = 1;
    }
    double* d = grads[i].data();
    const double* s = other.grads[i].data();
    for (std::size_t k = 0; k < grads[i].size(); ++k) d[k] += scale * s[k];
  }
}

void GradBuffer::scale(double s) {
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (!touched[i]) continue;
    double* d = grads[i].data();
    for (std::size_t k = 0; k < grads[i].size(); ++k) d[k] *= s;
  }
}

void GradBuffer::reset() {
  for (std::size_t i = 0; i < grads.size(); ++i) {
    grads[i] = Tensor();
    touched[i] = 0;
  }
}

double GradBuffer::l2_norm() const {
  double sq = 0.0;
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (!touched[i]) continue;
    const double* d = grads[i].data();
    for (std::size_t k = 0; k < grads[i].size(); ++k) sq += d[k] * d[k];
  }
  return std::sqrt(sq);
}

double GradBuffer::l2_norm_over(const std::vector<int>& param_ids) const {
  double sq = 0.0;
  for (int id : param_ids) {
    const std::size_t i = static_cast<std::size_t>(id);
    if (i >= grads.size() || !touched[i]) continue;
    const double* d = grads[i].data();
    for (std::size_t k = 0; k < grads[i].size(); ++k) sq += d[k] * d[k];
  }
  return std::sqrt(sq);
}

void AdamW::step(ParamStore& store, const GradBuffer& grads) {
  for (int id = 0; id < store.count(); ++id) {
    if (!grads.touched[static_cast<std::size_t>(id)]) continue;
    Parameter& p = store.at(id);
    const Tensor& g = grads.grads[static_cast<std::size_t>(id)];
    p.steps += 1;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(p.steps));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(p.steps));
    double* value = p.value.data();
    double* m = p.m.data();
    double* v = p.v.data();
    const double* gd = g.data();
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * gd[i];
      v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * gd[i] * gd[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      value[i] -= cfg_.lr * (mhat / (std::sqrt(vhat) + cfg_.eps) +
                             cfg_.weight_decay * value[i]);
    }
  }
}

int Tape::push(Node n) {
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

Tensor& Tape::grad_of(int id) {
  Node& n = node(id);
  if (n.grad.empty()) n.grad = Tensor(n.value.shape());
  return n.grad;
}

Tape::Var Tape::input(Tensor value) {
  Node n;
  n.value = std::move(value);
  n.needs_grad = false;
  return {push(std::move(n))};
}

Tape::Var Tape::param(int param_id) {
  Node n;
  n.value = store_->at(param_id).value;
  n.needs_grad = true;
  n.param_id = param_id;
  return {push(std::move(n))};
}

Tape::Var Tape::conv2d(Var xv, Var wv, Var bv) {
  const Tensor& x = value(xv);
  const Tensor& w = value(wv);
  const Tensor& b = value(bv);
  if (x.rank() != 3 || w.rank() != 4 || b.rank() != 1)
    throw ShapeError("conv2d: bad ranks");
  const int cin = x.dim(0), h = x.dim(1), wd = x.dim(2);
  const int cout = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  if (w.dim(1) != cin || b.dim(0) != cout)
    throw ShapeError("conv2d: channel mismatch");
  const int ph = kh / 2, pw = kw / 2;

  Tensor out({cout, h, wd});
  {
    const double* xdat = x.data();
    const double* wd_ = w.data();
    const double* bd = b.data();
    double* od = out.data();
    for (int co = 0; co < cout; ++co) {
      for (int oh = 0; oh < h; ++oh) {
        for (int ow = 0; ow < wd; ++ow) {
          double acc = bd[co];
          for (int ci = 0; ci < cin; ++ci) {
            const double* xrow = xdat + (static_cast<std::size_t>(ci) * h) * wd;
            const double* wrow =
                wd_ + ((static_cast<std::size_t>(co) * cin + ci) * kh) * kw;
            for (int r = 0; r < kh; ++r) {
              const int ih = oh + r - ph;
              if (ih < 0 || ih >= h) continue;
              for (int c = 0; c < kw; ++c) {
                const int iw = ow + c - pw;
                if (iw < 0 || iw >= wd) continue;
                acc += wrow[r * kw + c] * xrow[static_cast<std::size_t>(ih) * wd + iw];
              }
            }
          }
          od[(static_cast<std::size_t>(co) * h + oh) * wd + ow] = acc;
        }
      }
    }
  }

  Node n;
  n.value = std::move(out);
  n.needs_grad = wants_grad(xv) || wants_grad(wv) || wants_grad(bv);
  const int xid = xv.id, wid = wv.id, bid = bv.id;
  n.back = [xid, wid, bid, cin, cout, h, wd, kh, kw, ph, pw](Tape& t) {
    const int self = t.find_self_;
    const Tensor& dy = t.node(self).grad;
    const Tensor& x = t.node(xid).value;
    const Tensor& w = t.node(wid).value;
    const double* dyd = dy.data();
    const double* xd = x.data();
    const double* wdp = w.data();

    if (t.wants_grad({bid})) {
      Tensor& db = t.grad_of(bid);
      double* dbd = db.data();
      for (int co = 0; co < cout; ++co) {
        double acc = 0.0;
        const double* plane = dyd + static_cast<std::size_t>(co) * h * wd;
        for (int i = 0; i < h * wd; ++i) acc += plane[i];
        dbd[co] += acc;
      }
    }
    if (t.wants_grad({wid})) {
      Tensor& dw = t.grad_of(wid);
      double* dwd = dw.data();
      for (int co = 0; co < cout; ++co)
        for (int ci = 0; ci < cin; ++ci)
          for (int r = 0; r < kh; ++r)
            for (int c = 0; c < kw; ++c) {
              double acc = 0.0;
              for (int oh = 0; oh < h; ++oh) {
                const int ih = oh + r - ph;
                if (ih < 0 || ih >= h) continue;
                const double* dyrow = dyd + (static_cast<std::size_t>(co) * h + oh) * wd;
                const double* xrow = xd + (static_cast<std::size_t>(ci) * h + ih) * wd;
                for (int ow = 0; ow < wd; ++ow) {
                  const int iw = ow + c - pw;
                  if (iw < 0 || iw >= wd) continue;
                  acc += dyrow[ow] * xrow[iw];
                }
              }
              dwd[((static_cast<std::size_t>(co) * cin + ci) * kh + r) * kw + c] += acc;
            }
    }
    if (t.wants_grad({xid})) {
      Tensor& dx = t.grad_of(xid);
      double* dxd = dx.data();
      for (int co = 0; co < cout; ++co)
        for (int ci = 0; ci < cin; ++ci) {
          const double* wrow = wdp + ((static_cast<std::size_t>(co) * cin + ci) * kh) * kw;
          for (int oh = 0; oh < h; ++oh) {
            const double* dyrow = dyd + (static_cast<std::size_t>(co) * h + oh) * wd;
            for (int r = 0; r < kh; ++r) {
              const int ih = oh + r - ph;
              if (ih < 0 || ih >= h) continue;
              double* dxrow = dxd + (static_cast<std::size_t>(ci) * h + ih) * wd;
              for (int ow = 0; ow < wd; ++ow) {
                const double g = dyrow[ow];
                if (g == 0.0) continue;
                for (int c = 0; c < kw; ++c) {
                  const int iw = ow + c - pw;
                  if (iw < 0 || iw >= wd) continue;
                  dxrow[iw] += g * wrow[r * kw + c];
                }
              }
            }
          }
        }
    }
  };
  return {push(std::move(n))};
}

Tape::Var Tape::relu(Var xv) {
  const Tensor& x = value(xv);
  Tensor out = x;
  double* od = out.data();
  for (std::size_t i = 0; i < out.size(); ++i) od[i] = std::max(od[i], 0.0);

  Node n;
  n.value = std::move(out);
  n.needs_grad = wants_grad(xv);
  const int xid = xv.id;
  n.back = [xid](Tape& t) {
    if (!t.wants_grad({xid})) return;
    const int self = t.find_self_;
    const Tensor& dy = t.node(self).grad;
    const Tensor& x = t.node(xid).value;
    Tensor& dx = t.grad_of(xid);
    const double* dyd = dy.data();
    const double* xd = x.data();
    double* dxd = dx.data();
    for (std::size_t i = 0; i < dx.size(); ++i)
      if (xd[i] > 0.0) dxd[i] += dyd[i];
  };
  return {push(std::move(n))};
}

Tape::Var Tape::maxpool2(Var xv) {
  const Tensor& x = value(xv);
  const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
  if (h % 2 != 0 || w % 2 != 0) throw ShapeError("maxpool2 requires even H and W");
  const int oh = h / 2, ow = w / 2;
  Tensor out({c, oh, ow});
  std::vector<int> argmax(out.size());
  const double* xd = x.data();
  double* od = out.data();
  for (int ch = 0; ch < c; ++ch)
    for (int i = 0; i < oh; ++i)
      for (int j = 0; j < ow; ++j) {
        int best = -1;
        double bv = -1e300;
        for (int di = 0; di < 2; ++di)
          for (int dj = 0; dj < 2; ++dj) {
            const int idx = (ch * h + (2 * i + di)) * w + (2 * j + dj);
            if (xd[idx] > bv) {
              bv = xd[idx];
              best = idx;
            }
          }
        const std::size_t oidx = (static_cast<std::size_t>(ch) * oh + i) * ow + j;
        od[oidx] = bv;
        argmax[oidx] = best;
      }

  Node n;
  n.value = std::move(out);
  n.needs_grad = wants_grad(xv);
  const int xid = xv.id;
  n.back = [xid, argmax = std::move(argmax)](Tape& t) {
    if (!t.wants_grad({xid})) return;
    const Tensor& dy = t.node(t.find_self_).grad;
    Tensor& dx = t.grad_of(xid);
    const double* dyd = dy.data();
    double* dxd = dx.data();
    for (std::size_t i = 0; i < dy.size(); ++i)
      dxd[static_cast<std::size_t>(argmax[i])] += dyd[i];
  };
  return {push(std::move(n))};
}

Tape::Var Tape::upsample2(Var xv) {
  const Tensor& x = value(xv);
  const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
  Tensor out({c, 2 * h, 2 * w});
  const double* xd = x.data();
  double* od = out.data();
  for (int ch = 0; ch < c; ++ch)
    for (int i = 0; i < 2 * h; ++i)
      for (int j = 0; j < 2 * w; ++j)
        od[(static_cast<std::size_t>(ch) * 2 * h + i) * 2 * w + j] =
            xd[(static_cast<std::size_t>(ch) * h + i / 2) * w + j / 2];

  Node n;
  n.value = std::move(out);
  n.needs_grad = wants_grad(xv);
  const int xid = xv.id;
  n.back = [xid, c, h, w](Tape& t) {
    if (!t.wants_grad({xid})) return;
    const Tensor& dy = t.node(t.find_self_).grad;
    Tensor& dx = t.grad_of(xid);
    const double* dyd = dy.data();
    double* dxd = dx.data();
    for (int ch = 0; ch < c; ++ch)
      for (int i = 0; i < 2 * h; ++i)
        for (int j = 0; j < 2 * w; ++j)
          dxd[(static_cast<std::size_t>(ch) * h + i / 2) * w + j / 2] +=
              dyd[(static_cast<std::size_t>(ch) * 2 * h + i) * 2 * w + j];
  };
  return {push(std::move(n))};
}

Tape::Var Tape::concat_c(Var av, Var bv) {
  const Tensor& a = value(av);
  const Tensor& b = value(bv);
  if (a.dim(1) != b.dim(1) || a.dim(2) != b.dim(2))
    throw ShapeError("concat_c: spatial dims differ");
  const int ca = a.dim(0), cb = b.dim(0), h = a.dim(1), w = a.dim(2);
  Tensor out({ca + cb, h, w});
  std::copy(a.data(), a.data() + a.size(), out.data());
  std::copy(b.data(), b.data() + b.size(), out.data() + a.size());

  Node n;
  n.value = std::move(out);
  n.needs_grad = wants_grad(av) || wants_grad(bv);
  const int aid = av.id, bid = bv.id;
  const std::size_t asize = a.size();
  n.back = [aid, bid, asize](Tape& t) {
    const Tensor& dy = t.node(t.find_self_).grad;
    const double* dyd = dy.data();
    if (t.wants_grad({aid})) {
      Tensor& da = t.grad_of(aid);
      double* d = da.data();
      for (std::size_t i = 0; i < asize; ++i) d[i] += dyd[i];
    }
    if (t.wants_grad({bid})) {
      Tensor& db = t.grad_of(bid);
      double* d = db.data();
      for (std::size_t i = 0; i < db.size(); ++i) d[i] += dyd[asize + i];
    }
  };
  return {push(std::move(n))};
}

Tape::Var Tape::gap(Var xv) {
  const Tensor& x = value(xv);
  const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
  Tensor out({c});
  const double* xd = x.data();
  double* od = out.data();
  const double inv = 1.0 / static_cast<double>(h * w);
  for (int ch = 0; ch < c; ++ch) {
    double acc = 0.0;
    const double* plane = xd + static_cast<std::size_t>(ch) * h * w;
    for (int i = 0; i < h * w; ++i) acc += plane[i];
    od[ch] = acc * inv;
  }

  Node n;
  n.value = std::move(out);
  n.needs_grad = wants_grad(xv);
  const int xid = xv.id;
  n.back = [xid, c, h, w](Tape& t) {
    if (!t.wants_grad({xid})) return;
    const Tensor& dy = t.node(t.find_self_).grad;
    Tensor& dx = t.grad_of(xid);
    const double* dyd = dy.data();
    double* dxd = dx.data();
    const double inv = 1.0 / static_cast<double>(h * w);
    for (int ch = 0; ch < c; ++ch) {
      const double g = dyd[ch] * inv;
      double* plane = dxd + static_cast<std::size_t>(ch) * h * w;
      for (int i = 0; i < h * w; ++i) plane[i] += g;
    }
  };
  return {push(std::move(n))};
}

Tape::Var Tape::linear(Var xv, Var wv, Var bv) {
  const Tensor& x = value(xv);
  const Tensor& w = value(wv);
  const Tensor& b = value(bv);
  if (x.rank() != 1 || w.rank() != 2 || b.rank() != 1)
    throw ShapeError("linear: bad ranks");
  const int in = x.dim(0), out_dim = w.dim(0);
  if (w.dim(1) != in || b.dim(0) != out_dim) throw ShapeError("linear: size mismatch");

  Tensor out({out_dim});
  const double* xd = x.data();
  const double* wd = w.data();
  const double* bd = b.data();
  double* od = out.data();
  for (int o = 0; o < out_dim; ++o) {
    double acc = bd[o];
    const double* row = wd + static_cast<std::size_t>(o) * in;
    for (int i = 0; i < in; ++i) acc += row[i] * xd[i];
    od[o] = acc;
  }

  Node n;
  n.value = std::move(out);
  n.needs_grad = wants_grad(xv) || wants_grad(wv) || wants_grad(bv);
  const int xid = xv.id, wid = wv.id, bid = bv.id;
  n.back = [xid, wid, bid, in, out_dim](Tape& t) {
    const Tensor& dy = t.node(t.find_self_).grad;
    const double* dyd = dy.data();
    const Tensor& x = t.node(xid).value;
    const Tensor& w = t.node(wid).value;
    if (t.wants_grad({bid})) {
      double* db = t.grad_of(bid).data();
      for (int o = 0; o < out_dim; ++o) db[o] += dyd[o];
    }
    if (t.wants_grad({wid})) {
      double* dw = t.grad_of(wid).data();
      const double* xd = x.data();
      for (int o = 0; o < out_dim; ++o) {
        double* row = dw + static_cast<std::size_t>(o) * in;
        const double g = dyd[o];
        for (int i = 0; i < in; ++i) row[i] += g * xd[i];
      }
    }
    if (t.wants_grad({xid})) {
      double* dx = t.grad_of(xid).data();
      const double* wd = w.data();
      for (int o = 0; o < out_dim; ++o) {
        const double g = dyd[o];
        const double* row = wd + static_cast<std::size_t>(o) * in;
        for (int i = 0; i < in; ++i) dx[i] += g * row[i];
      }
    }
  };
  return {push(std::move(n))};
}

Tape::Var Tape::bce_with_logits(Var lv, std::vector<double> targets) {
  const Tensor& logits = value(lv);
  if (logits.size() != targets.size()) throw ShapeError("bce: length mismatch");
  for (double y : targets)
    if (y != 0.0 && y != 1.0) throw DataError("bce: targets must be 0 or 1");

  double sum = 0.0;
  const double* ld = logits.data();
  for (std::size_t i = 0; i < targets.size(); ++i) sum += bce_term(ld[i], targets[i]);
  Tensor out({1});
  out[0] = sum / static_cast<double>(targets.size());

  Node n;
  n.value = std::move(out);
  n.needs_grad = wants_grad(lv);
  const int lid = lv.id;
  n.back = [lid, targets = std::move(targets)](Tape& t) {
    if (!t.wants_grad({lid})) return;
    const double g = t.node(t.find_self_).grad[0] / static_cast<double>(targets.size());
    const Tensor& logits = t.node(lid).value;
    double* dl = t.grad_of(lid).data();
    const double* ld = logits.data();
    for (std::size_t i = 0; i < targets.size(); ++i)
      dl[i] += g * (sigmoid(ld[i]) - targets[i]);
  };
  return {push(std::move(n))};
}

Tape::Var Tape::masked_mae(Var pv, Tensor original, Tensor mask) {
  const Tensor& pred = value(pv);
  if (!pred.same_shape(original) || !pred.same_shape(mask))
    throw ShapeError("masked_mae: shape mismatch");
  const double* pd = pred.data();
  const double* od = original.data();
  const double* md = mask.data();
  double sum = 0.0, count = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i)
    if (md[i] != 0.0) {
      sum += std::fabs(pd[i] - od[i]);
      count += 1.0;
    }
  if (count == 0.0) throw DegenerateInputError("masked_mae: empty mask");
  Tensor out({1});
  out[0] = sum / count;

  Node n;
  n.value = std::move(out);
  n.needs_grad = wants_grad(pv);
  const int pid = pv.id;
  n.back = [pid, original = std::move(original), mask = std::move(mask), count](Tape& t) {
    if (!t.wants_grad({pid})) return;
    const double g = t.node(t.find_self_).grad[0] / count;
    const Tensor& pred = t.node(pid).value;
    double* dp = t.grad_of(pid).data();
    const double* pd = pred.data();
    const double* od = original.data();
    const double* md = mask.data();
    for (std::size_t i = 0; i < pred.size(); ++i) {
      if (md[i] == 0.0) continue;
      const double d = pd[i] - od[i];
      dp[i] += g * (d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0));
    }
  };
  return {push(std::move(n))};
}

Tape::Var Tape::softmax_xent_pixels(Var lv, std::vector<int> labels, int ignore_id) {
  const Tensor& logits = value(lv);
  if (logits.rank() != 3) throw ShapeError("softmax_xent: logits must be {nc,H,W}");
  const int nc = logits.dim(0), h = logits.dim(1), w = logits.dim(2);
  if (labels.size() != static_cast<std::size_t>(h) * w)
    throw ShapeError("softmax_xent: label count mismatch");

  const double* ld = logits.data();
  // Per-pixel softmax probabilities, kept for the backward pass.
  std::vector<double> probs(static_cast<std::size_t>(nc) * h * w);
  double loss = 0.0;
  std::size_t valid = 0;
  for (int p = 0; p < h * w; ++p) {
    double mx = -1e300;
    for (int c = 0; c < nc; ++c) mx = std::max(mx, ld[static_cast<std::size_t>(c) * h * w + p]);
    double z = 0.0;
    for (int c = 0; c < nc; ++c)
      z += std::exp(ld[static_cast<std::size_t>(c) * h * w + p] - mx);
    const double logz = std::log(z) + mx;
    for (int c = 0; c < nc; ++c)
      probs[static_cast<std::size_t>(c) * h * w + p] =
          std::exp(ld[static_cast<std::size_t>(c) * h * w + p] - logz);
    const int y = labels[static_cast<std::size_t>(p)];
    if (y == ignore_id) continue;
    if (y < 0 || y >= nc) throw DataError("softmax_xent: label id out of range");
    loss += logz - ld[static_cast<std::size_t>(y) * h * w + p];
    ++valid;
  }
  if (valid == 0) throw DataError("softmax_xent: all pixels ignored");
  Tensor out({1});
  out[0] = loss / static_cast<double>(valid);

  Node n;
  n.value = std::move(out);
  n.needs_grad = wants_grad(lv);
  const int lid = lv.id;
  n.back = [lid, labels = std::move(labels), probs = std::move(probs), nc, h, w, valid,
            ignore_id](Tape& t) {
    if (!t.wants_grad({lid})) return;
    const double g = t.node(t.find_self_).grad[0] / static_cast<double>(valid);
    double* dl = t.grad_of(lid).data();
    for (int p = 0; p < h * w; ++p) {
      const int y = labels[static_cast<std::size_t>(p)];
      if (y == ignore_id) continue;
      for (int c = 0; c < nc; ++c) {
        const std::size_t idx = static_cast<std::size_t>(c) * h * w + p;
        dl[idx] += g * (probs[idx] - (c == y ? 1.0 : 0.0));
      }
    }
  };
  return {push(std::move(n))};
}

Tape::Var Tape::weighted_sum(const std::vector<std::pair<Var, double>>& terms) {
  double total = 0.0;
  bool needs = false;
  for (const auto& [v, wgt] : terms) {
    if (value(v).size() != 1) throw ShapeError("weighted_sum expects scalars");
    total += wgt * value(v)[0];
    needs = needs || wants_grad(v);
  }
  Tensor out({1});
  out[0] = total;

  Node n;
  n.value = std::move(out);
  n.needs_grad = needs;
  std::vector<std::pair<int, double>> refs;
  refs.reserve(terms.size());
  for (const auto& [v, wgt] : terms) refs.emplace_back(v.id, wgt);
  n.back = [refs = std::move(refs)](Tape& t) {
    const double g = t.node(t.find_self_).grad[0];
    for (const auto& [id, wgt] : refs) {
      if (!t.wants_grad({id})) continue;
      t.grad_of(id)[0] += g * wgt;
    }
  };
  return {push(std::move(n))};
}

void Tape::backward(Var loss) {
  if (ran_backward_) throw Error("Tape::backward may run only once per tape");
  ran_backward_ = true;
  Node& l = node(loss.id);
  if (l.value.size() != 1) throw ShapeError("backward expects a scalar loss");
  if (!l.needs_grad) return;  // loss does not depend on any parameter
  grad_of(loss.id)[0] = 1.0;
  for (int id = loss.id; id >= 0; --id) {
    Node& n = node(id);
    if (!n.needs_grad || n.grad.empty() || !n.back) continue;
    find_self_ = id;
    n.back(*this);
  }
}

void Tape::export_grads(GradBuffer& buffer) const {
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const Node& n = nodes_[i];
    if (n.param_id >= 0 && !n.grad.empty()) buffer.accumulate(n.param_id, n.grad);
  }
}

void init_fan_in_uniform(Tensor& t, int fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(std::max(1, fan_in)));
  double* d = t.data();
  for (std::size_t i = 0; i < t.size(); ++i) d[i] = rng.uniform(-bound, bound);
}

}  // namespace cmtssl::nn

#include "mmvdn/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include "mmvdn/lstm.hpp"
#include "mmvdn/mil.hpp"
#include "mmvdn/ops.hpp"

namespace mmvdn {
namespace {

double project(const Tensor& out, const std::vector<double>& w) {
  double acc = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) acc += w[i] * out[i];
  return acc;
}

std::vector<double> random_weights(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> w(n);
  for (auto& x : w) x = u(rng);
  return w;
}

Tensor uniform(Shape shape, std::mt19937_64& rng, float lo = -1.f, float hi = 1.f) {
  Tensor t(std::move(shape));
  std::uniform_real_distribution<float> u(lo, hi);
  for (auto& x : t.data()) x = u(rng);
  return t;
}

// Distinct values in [-1, 1] spaced 2 / (n - 1) apart, randomly placed.
Tensor spaced(Shape shape, std::mt19937_64& rng) {
  Tensor t(std::move(shape));
  const std::size_t n = t.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  for (std::size_t i = 0; i < n; ++i) {
    t[order[i]] = n == 1 ? 0.5f : -1.f + 2.f * static_cast<float>(i) / static_cast<float>(n - 1);
  }
  return t;
}

struct Instance {
  GradcheckFn fn;
  std::vector<Tensor> leaves;
};

using Generator = std::function<Instance(std::mt19937_64&)>;

Instance conv_instance(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> cin(1, 3), cout(1, 3), hw(4, 7), k(1, 3), st(1, 2), pd(0, 2);
  const int ci = cin(rng), co = cout(rng), h = hw(rng), kk = k(rng), s = st(rng), p = pd(rng);
  return {[s, p](Tape&, const std::vector<Var>& v) { return conv2d(v[0], v[1], v[2], s, p); },
          {uniform({ci, h, h}, rng), uniform({co, ci, kk, kk}, rng), uniform({co}, rng)}};
}

Instance pool_instance(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> ch(1, 3), hw(3, 7), k(1, 3), st(1, 2);
  const int kk = k(rng), s = st(rng);
  const int h = std::max(kk, hw(rng));
  return {[kk, s](Tape&, const std::vector<Var>& v) { return maxpool2d(v[0], kk, s).output; },
          {spaced({ch(rng), h, h}, rng)}};
}

Instance emax_instance(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> n(2, 12);
  const int len = n(rng);
  Tensor both = spaced({2, len}, rng);
  Tensor a({len}), b({len});
  for (int i = 0; i < len; ++i) {
    a[static_cast<std::size_t>(i)] = both[static_cast<std::size_t>(i)];
    b[static_cast<std::size_t>(i)] = both[static_cast<std::size_t>(len + i)];
  }
  return {[](Tape&, const std::vector<Var>& v) { return elementwise_max(v[0], v[1]).output; }, {a, b}};
}

Instance mil_location_instance(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> n(1, 6), h(1, 5);
  const int hh = h(rng);
  return {[](Tape&, const std::vector<Var>& v) { return mil_over_locations(v[0]).values; },
          {spaced({n(rng), hh, hh}, rng)}};
}

Instance mil_scale_instance(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> n(1, 5), sc(1, 3), h(1, 4);
  const int concepts = n(rng), scales = sc(rng);
  std::vector<Shape> shapes;
  std::size_t total = 0;
  for (int s = 0; s < scales; ++s) {
    const int hh = h(rng);
    shapes.push_back({concepts, hh, hh});
    total += shape_size(shapes.back());
  }
  // One grid across all scales keeps every cross-scale comparison separated.
  Tensor all = spaced({static_cast<int>(total)}, rng);
  std::vector<Tensor> leaves;
  std::size_t off = 0;
  for (const auto& sh : shapes) {
    Tensor t(sh);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = all[off + i];
    off += t.size();
    leaves.push_back(std::move(t));
  }
  return {[](Tape&, const std::vector<Var>& v) {
            std::vector<ScaleMap> maps;
            for (const Var& m : v) maps.push_back({0, m});
            return mil_pool(maps).v;
          },
          std::move(leaves)};
}

Instance lstm_cell_instance(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> in(1, 4), hid(1, 4);
  const int x = in(rng), h = hid(rng);
  return {[](Tape&, const std::vector<Var>& v) {
            LstmState s = lstm_cell_step(v[0], v[1], v[2], {v[3], v[4]});
            const Var parts[] = {s.h, s.c};
            return concat(parts);
          },
          {uniform({4 * h, x + h}, rng), uniform({4 * h}, rng), uniform({x}, rng), uniform({h}, rng),
           uniform({h}, rng)}};
}

Instance encode_decode_instance(std::mt19937_64& rng) {
  CaptionerDims d{3, 4, 3, 6};
  ParameterSet params;
  add_captioner_params(params, d, rng());
  std::vector<Tensor> leaves;
  for (const auto& p : params) leaves.push_back(uniform(p->value.shape(), rng, -0.5f, 0.5f));
  leaves.push_back(uniform({d.concepts}, rng));
  leaves.push_back(uniform({d.concepts}, rng));
  std::uniform_int_distribution<int> word(kReservedTokens, d.vocab - 1);
  CaptionSequence gold{{kBos, word(rng), word(rng), kEos}};
  std::vector<std::string> names;
  for (const auto& p : params) names.push_back(p->name);
  return {[d, gold, names](Tape& tape, const std::vector<Var>& v) {
            CaptionerVars p;
            p.dims = d;
            auto pick = [&](const std::string& name) {
              return v[static_cast<std::size_t>(std::find(names.begin(), names.end(), name) - names.begin())];
            };
            p.lstm1_w = pick("lstm1.weight");
            p.lstm1_b = pick("lstm1.bias");
            p.lstm2_w = pick("lstm2.weight");
            p.lstm2_b = pick("lstm2.bias");
            p.embed = pick("embed.weight");
            p.out_w = pick("out.weight");
            p.out_b = pick("out.bias");
            (void)tape;
            const Var visual[] = {v[v.size() - 2], v[v.size() - 1]};
            return decode_teacher_forced(p, encode(p, visual), gold).loss;
          },
          std::move(leaves)};
}

Instance softmax_xent_instance(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> n(2, 8);
  const int len = n(rng);
  const int target = std::uniform_int_distribution<int>(0, len - 1)(rng);
  return {[target](Tape&, const std::vector<Var>& v) { return softmax_cross_entropy(v[0], target); },
          {uniform({len}, rng, -2.f, 2.f)}};
}

Instance dense_instance(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> n(1, 4);
  const int m = n(rng), k = n(rng);
  return {[m](Tape&, const std::vector<Var>& v) {
            Var y = add(matmul(v[0], v[1]), v[2]);
            const Var parts[] = {sigmoid(y), tanh(slice(y, 0, m)), mul(y, y)};
            return sub(concat(parts), scale(reshape(concat(parts), {3 * m}), 0.25f));
          },
          {uniform({m, k}, rng), uniform({k}, rng), uniform({m}, rng)}};
}

struct SuiteEntry {
  std::string name;
  std::string group;
  Generator make;
};

const std::vector<SuiteEntry>& suite() {
  static const std::vector<SuiteEntry> entries{
      {"conv2d", "conv", conv_instance},
      {"maxpool2d", "conv", pool_instance},
      {"elementwise_max", "mil", emax_instance},
      {"mil_location", "mil", mil_location_instance},
      {"mil_scale", "mil", mil_scale_instance},
      {"lstm_cell", "lstm", lstm_cell_instance},
      {"encode_decode", "lstm", encode_decode_instance},
      {"softmax_xent", "lstm", softmax_xent_instance},
      {"dense", "basic", dense_instance},
  };
  return entries;
}

}  // namespace

GradcheckResult check_gradients(const GradcheckFn& fn, const std::vector<Tensor>& leaves, std::uint64_t seed,
                                double eps) {
  std::vector<double> w;
  std::vector<Tensor> analytic;
  {
    Tape tape;
    std::vector<Var> vars;
    for (const auto& l : leaves) vars.push_back(tape.variable(l));
    Var out = fn(tape, vars);
    w = random_weights(out.value().size(), seed);
    Tensor wt(out.shape());
    for (std::size_t i = 0; i < wt.size(); ++i) wt[i] = static_cast<float>(w[i]);
    Var loss = sum(mul(out, tape.constant(wt)));
    tape.backward(loss);
    for (const auto& v : vars) analytic.push_back(tape.grad(v));
    // The projection above used float weights; keep the finite-difference
    // weights identical.
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = wt[i];
  }
  auto evaluate = [&](const std::vector<Tensor>& values) {
    Tape tape;
    std::vector<Var> vars;
    for (const auto& l : values) vars.push_back(tape.constant(l));
    return project(fn(tape, vars).value(), w);
  };
  GradcheckResult r;
  std::vector<Tensor> work = leaves;
  for (std::size_t li = 0; li < work.size(); ++li) {
    for (std::size_t i = 0; i < work[li].size(); ++i) {
      const float orig = work[li][i];
      work[li][i] = orig + static_cast<float>(eps);
      const double plus = evaluate(work);
      work[li][i] = orig - static_cast<float>(eps);
      const double minus = evaluate(work);
      work[li][i] = orig;
      const double numeric = (plus - minus) / (2.0 * eps);
      const double a = analytic[li][i];
      r.max_rel_error = std::max(r.max_rel_error, std::abs(a - numeric) / std::max(1.0, std::abs(a)));
      ++r.coordinates;
    }
  }
  return r;
}

std::vector<std::string> gradcheck_ops() {
  std::vector<std::string> out;
  for (const auto& e : suite()) out.push_back(e.name);
  return out;
}

std::vector<GradcheckReport> run_gradcheck_suite(const std::string& which, std::uint64_t seed, int instances) {
  if (instances < 1) throw std::invalid_argument("gradcheck: instances must be >= 1");
  std::vector<GradcheckReport> out;
  for (const auto& e : suite()) {
    if (which != "all" && which != e.group && which != e.name) continue;
    std::uint64_t h = 1469598103934665603ull;
    for (char ch : e.name) h = (h ^ static_cast<unsigned char>(ch)) * 1099511628211ull;
    std::mt19937_64 rng(seed ^ h);
    GradcheckReport rep{e.name, instances, 0.0, true};
    for (int k = 0; k < instances; ++k) {
      Instance inst = e.make(rng);
      const auto r = check_gradients(inst.fn, inst.leaves, rng());
      rep.max_rel_error = std::max(rep.max_rel_error, r.max_rel_error);
    }
    rep.passed = rep.max_rel_error <= kGradcheckTolerance;
    out.push_back(rep);
  }
  if (out.empty()) throw std::invalid_argument("gradcheck: unknown op or group '" + which + "'");
  return out;
}

}  // namespace mmvdn

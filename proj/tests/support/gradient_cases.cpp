#include "support/gradient_cases.hpp"

#include <algorithm>
#include <memory>

#include "ctxslu/attention/context_attention.hpp"
#include "ctxslu/autodiff/tape.hpp"
#include "ctxslu/encoder/lstm.hpp"

namespace test_support {

using namespace ctxslu;
using ad::Tape;
using ad::Tensor;
using ad::Var;

Tensor random_tensor(ad::Shape shape, std::mt19937_64& rng, double scale) {
  Tensor t(std::move(shape), true);
  t.fill_uniform(rng, -scale, scale);
  return t;
}

std::vector<double> random_values(std::size_t n, std::mt19937_64& rng, double scale) {
  std::uniform_real_distribution<double> u(-scale, scale);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

double check_all(const ad::LossBuilder& f, const std::vector<Tensor*>& params) {
  double worst = 0.0;
  for (Tensor* p : params) worst = std::max(worst, ad::finite_diff_check(f, *p));
  return worst;
}

namespace {

std::size_t pick(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

/// Reduces a vector output to a scalar with a fixed random projection.
Var project(Tape& tape, Var y, const std::vector<double>& r) { return tape.dot(tape.constant(r), y); }

using Builder = std::function<Var(Tape&, std::vector<Tensor>&)>;

/// Case over freshly drawn input tensors of the given shapes.
GradientCase unary_case(std::string name, std::vector<ad::Shape> shapes, std::size_t out_dim, Builder build) {
  return {std::move(name), [shapes, out_dim, build](std::mt19937_64& rng) {
            std::vector<Tensor> in;
            for (const auto& s : shapes) in.push_back(random_tensor(s, rng));
            const auto r = random_values(out_dim, rng);
            std::vector<Tensor*> ptrs;
            for (auto& t : in) ptrs.push_back(&t);
            return check_all([&](Tape& tape) { return project(tape, build(tape, in), r); }, ptrs);
          }};
}

}  // namespace

std::vector<GradientCase> op_gradient_cases() {
  std::vector<GradientCase> cases;
  cases.push_back(unary_case("matvec", {{3, 4}, {4}}, 3, [](Tape& t, auto& in) {
    return t.matvec(t.leaf(in[0]), t.leaf(in[1]));
  }));
  cases.push_back(unary_case("matvec_cols", {{3, 5}, {2}}, 3, [](Tape& t, auto& in) {
    return t.matvec_cols(t.leaf(in[0]), t.leaf(in[1]), 2);
  }));
  cases.push_back(unary_case("add", {{4}, {4}}, 4, [](Tape& t, auto& in) {
    return t.add(t.leaf(in[0]), t.leaf(in[1]));
  }));
  cases.push_back(unary_case("add_n", {{4}, {4}, {4}}, 4, [](Tape& t, auto& in) {
    std::vector<Var> v{t.leaf(in[0]), t.leaf(in[1]), t.leaf(in[2]), t.leaf(in[0])};
    return t.add(v);
  }));
  cases.push_back(unary_case("mul", {{4}, {4}}, 4, [](Tape& t, auto& in) {
    return t.mul(t.leaf(in[0]), t.leaf(in[1]));
  }));
  cases.push_back(unary_case("scale", {{4}}, 4, [](Tape& t, auto& in) { return t.scale(t.leaf(in[0]), -1.7); }));
  cases.push_back(unary_case("tanh", {{4}}, 4, [](Tape& t, auto& in) { return t.tanh(t.leaf(in[0])); }));
  cases.push_back(unary_case("sigmoid", {{4}}, 4, [](Tape& t, auto& in) { return t.sigmoid(t.leaf(in[0])); }));
  cases.push_back(unary_case("concat", {{2}, {3}}, 5, [](Tape& t, auto& in) {
    return t.concat(t.leaf(in[0]), t.leaf(in[1]));
  }));
  cases.push_back(unary_case("concat_n", {{2}, {3}, {1}}, 6, [](Tape& t, auto& in) {
    std::vector<Var> v{t.leaf(in[0]), t.leaf(in[1]), t.leaf(in[2])};
    return t.concat(v);
  }));
  cases.push_back(unary_case("slice", {{6}}, 3, [](Tape& t, auto& in) { return t.slice(t.tanh(t.leaf(in[0])), 2, 3); }));
  cases.push_back(unary_case("dot", {{5}, {5}}, 1, [](Tape& t, auto& in) {
    return t.dot(t.leaf(in[0]), t.leaf(in[1]));
  }));
  cases.push_back(unary_case("sum", {{5}}, 1, [](Tape& t, auto& in) { return t.sum(t.leaf(in[0])); }));
  cases.push_back({"masked_softmax", [](std::mt19937_64& rng) {
                     Tensor s = random_tensor({6}, rng, 2.0);
                     std::vector<bool> mask(6);
                     for (std::size_t i = 0; i < 6; ++i) mask[i] = pick(rng, 0, 1) == 1;
                     mask[pick(rng, 0, 5)] = true;
                     const auto r = random_values(6, rng);
                     return check_all([&](Tape& t) { return project(t, t.masked_softmax(t.leaf(s), mask), r); }, {&s});
                   }});
  cases.push_back({"embedding", [](std::mt19937_64& rng) {
                     Tensor E = random_tensor({3, 4}, rng);
                     const std::size_t k = pick(rng, 0, 3);
                     const auto r = random_values(3, rng);
                     return check_all([&](Tape& t) { return project(t, t.tanh(t.embedding(E, k)), r); }, {&E});
                   }});
  cases.push_back(unary_case("weighted_sum", {{3}, {4}, {4}, {4}}, 4, [](Tape& t, auto& in) {
    std::vector<Var> v{t.leaf(in[1]), t.leaf(in[2]), t.leaf(in[3])};
    return t.weighted_sum(t.leaf(in[0]), v);
  }));
  cases.push_back({"bce_with_logits", [](std::mt19937_64& rng) {
                     Tensor z = random_tensor({5}, rng, 3.0);
                     std::vector<double> y(5);
                     for (auto& v : y) v = static_cast<double>(pick(rng, 0, 1));
                     return check_all([&](Tape& t) { return t.bce_with_logits(t.leaf(z), y); }, {&z});
                   }});
  cases.push_back({"softmax_cross_entropy", [](std::mt19937_64& rng) {
                     Tensor z = random_tensor({5}, rng, 3.0);
                     const std::size_t k = pick(rng, 0, 4);
                     return check_all([&](Tape& t) { return t.softmax_cross_entropy(t.leaf(z), k); }, {&z});
                   }});
  return cases;
}

std::vector<GradientCase> encoder_gradient_cases() {
  std::vector<GradientCase> cases;
  cases.push_back({"lstm_step", [](std::mt19937_64& rng) {
                     auto p = enc::LstmParams::init(3, 2, rng);
                     p.W.fill_uniform(rng, -0.8, 0.8);
                     p.U.fill_uniform(rng, -0.8, 0.8);
                     p.b.fill_uniform(rng, -0.8, 0.8);
                     Tensor x = random_tensor({3}, rng), h = random_tensor({2}, rng), c = random_tensor({2}, rng);
                     const auto r1 = random_values(2, rng), r2 = random_values(2, rng);
                     auto f = [&](Tape& t) {
                       auto s = enc::lstm_step(t, p, t.leaf(x), t.leaf(h), t.leaf(c));
                       return t.add(project(t, s.h, r1), project(t, s.c, r2));
                     };
                     return check_all(f, {&p.W, &p.U, &p.b, &x, &h, &c});
                   }});
  for (bool with_suffix : {false, true}) {
    cases.push_back({with_suffix ? "bilstm_encode_suffix" : "bilstm_encode", [with_suffix](std::mt19937_64& rng) {
                       const std::size_t in = 3, suffix = with_suffix ? 2 : 0, len = pick(rng, 1, 4);
                       auto p = enc::BiLstmParams::init(in + suffix, 4, rng);
                       for (auto* d : {&p.forward, &p.backward}) {
                         d->W.fill_uniform(rng, -0.8, 0.8);
                         d->U.fill_uniform(rng, -0.8, 0.8);
                       }
                       std::vector<Tensor> xs;
                       for (std::size_t i = 0; i < len; ++i) xs.push_back(random_tensor({in}, rng));
                       Tensor s = random_tensor({with_suffix ? suffix : 1}, rng);
                       const auto r = random_values(4, rng);
                       std::vector<std::vector<double>> rs;
                       for (std::size_t i = 0; i < len; ++i) rs.push_back(random_values(4, rng));
                       auto f = [&](Tape& t) {
                         std::vector<Var> seq;
                         for (auto& x : xs) seq.push_back(t.leaf(x));
                         auto out = with_suffix ? enc::bilstm_encode(t, p, seq, t.leaf(s)) : enc::bilstm_encode(t, p, seq);
                         Var loss = project(t, out.summary, r);
                         for (std::size_t i = 0; i < len; ++i) loss = t.add(loss, project(t, out.state(t, i), rs[i]));
                         return loss;
                       };
                       std::vector<Tensor*> ps{&p.forward.W, &p.forward.U, &p.forward.b,
                                               &p.backward.W, &p.backward.U, &p.backward.b};
                       for (auto& x : xs) ps.push_back(&x);
                       if (with_suffix) ps.push_back(&s);
                       return check_all(f, ps);
                     }});
  }
  return cases;
}

std::vector<GradientCase> attention_gradient_cases() {
  std::vector<GradientCase> cases;
  for (auto level : {attn::Level::sentence, attn::Level::role}) {
    for (auto repr : {attn::HistoryRepr::intent_only, attn::HistoryRepr::intent_and_distance}) {
      for (const auto& cfg : attn::grid_rows(level, repr)) {
        const std::string name = std::string(to_string(level)) + "/" + std::string(to_string(repr)) + "/" +
                                 std::string(to_string(cfg.kind)) + "/" +
                                 std::string(to_string(cfg.speaker_indicator));
        cases.push_back({name, [cfg](std::mt19937_64& rng) {
                           const std::size_t dim = 3, ctx = 7, n = pick(rng, 1, 7);
                           auto p = attn::AttentionParams::init(dim, rng);
                           p.w.fill_uniform(rng, -1, 1);
                           p.b.fill_uniform(rng, -1, 1);
                           Tensor D = random_tensor({dim, ctx}, rng), S = random_tensor({dim, 2}, rng);
                           Tensor h = random_tensor({dim}, rng);
                           std::vector<Tensor> intents;
                           std::vector<attn::HistoryEntry> entries(n);
                           for (std::size_t i = 0; i < n; ++i) {
                             intents.push_back(random_tensor({dim}, rng));
                             entries[i].distance = i + 1;
                             entries[i].role = pick(rng, 0, 1) ? Role::tourist : Role::guide;
                           }
                           const Role cur = pick(rng, 0, 1) ? Role::tourist : Role::guide;
                           const auto r = random_values(cfg.summary_dim(dim), rng);
                           auto f = [&](Tape& t) {
                             for (std::size_t i = 0; i < n; ++i) entries[i].intent = t.leaf(intents[i]);
                             auto s = attn::summarize_history(t, cfg, t.leaf(h), entries, D, S, cur, p);
                             return project(t, s.s_hist, r);
                           };
                           std::vector<Tensor*> ps{&p.w, &p.b, &D, &S, &h};
                           for (auto& u : intents) ps.push_back(&u);
                           return check_all(f, ps);
                         }});
      }
    }
  }
  return cases;
}

}  // namespace test_support

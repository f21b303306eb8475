#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "avsd/log_dist.hpp"
#include "avsd/rkl.hpp"
#include "avsd/signal.hpp"
#include "support.hpp"

using namespace avsd;
using test::max_abs_diff;

namespace {

// p = [0.2, 0.5, 0.3]; q1 = [0.8, 0.1, 0.1]; q2 = [0.2, 0.7, 0.1].
// Expected values come from tests/oracles/worked_example.py.
struct Example {
  LogDist p = LogDist::from_probs(std::vector{0.2, 0.5, 0.3});
  ViewFamily fam{{LogDist::from_probs(std::vector{0.8, 0.1, 0.1}), LogDist::from_probs(std::vector{0.2, 0.7, 0.1})}};
};

void check_vec(const Vec& got, std::initializer_list<double> want, double tol = 1e-12) {
  REQUIRE(static_cast<std::size_t>(got.size()) == want.size());
  Eigen::Index i = 0;
  for (double w : want) {
    CHECK(std::abs(got[i] - w) <= tol);
    ++i;
  }
}

}  // namespace

TEST_CASE("log_dist normalizes and floors") {
  const auto d = LogDist::from_logits(Vec::LinSpaced(5, -2.0, 2.0));
  CHECK(std::abs(log_sum_exp(d.logp())) < 1e-12);

  Vec raw(3);
  raw << 0.0, -1000.0, -std::numeric_limits<double>::infinity();
  const auto f = LogDist::from_log_probs(raw);
  CHECK(f[1] == kLogFloor);
  CHECK(f[2] == kLogFloor);
  CHECK(std::abs(log_sum_exp(f.logp())) < 1e-12);

  CHECK_THROWS_AS(LogDist::from_probs(std::vector{0.5, -0.1}), RejectedInput);
  Vec nan(2);
  nan << 0.0, std::nan("");
  CHECK_THROWS_AS(LogDist::from_logits(nan), RejectedInput);
}

TEST_CASE("view family validates shape and weights") {
  const auto a = LogDist::uniform(3);
  const auto b = LogDist::uniform(4);
  CHECK_THROWS_AS(ViewFamily({a, b}), RejectedInput);
  CHECK_THROWS_AS(ViewFamily(std::vector<LogDist>{}), RejectedInput);
  CHECK_THROWS_AS(ViewFamily({a, a}, {0.6, 0.6}), RejectedInput);
  CHECK_THROWS_AS(ViewFamily({a, a}, {1.5, -0.5}), RejectedInput);
  const ViewFamily ok({a, a});
  CHECK(ok.weights()[0] == 0.5);
}

TEST_CASE("per-view advantages of the worked example") {
  Example ex;
  const auto d = per_view_advantages(ex.p, ex.fam);
  check_vec(d.row(0).transpose(), {1.3862943611198906, -1.6094379124341004, -1.0986122886681097});
  check_vec(d.row(1).transpose(), {0.0, 0.33647223662121293, -1.0986122886681097});

  CHECK(per_view_advantages(ex.p, ViewFamily({ex.p})).cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS_AS(per_view_advantages(LogDist::uniform(4), ex.fam), RejectedInput);
}

TEST_CASE("geometric consensus and arithmetic marginal") {
  Example ex;
  const auto g = geometric_consensus(ex.fam);
  check_vec(g.log_unnorm.array().exp().matrix(), {0.4, 0.26457513110645906, 0.1});
  check_vec(g.normalized.probs(), {0.52316637531897987, 0.34604203085127516, 0.13079159382974497});
  check_vec(arithmetic_marginal(ex.fam).probs(), {0.5, 0.4, 0.1});

  const ViewFamily single({ex.p});
  CHECK(max_abs_diff(geometric_consensus(single).normalized.logp(), ex.p.logp()) < 1e-15);
  CHECK(max_abs_diff(arithmetic_marginal(single).logp(), ex.p.logp()) < 1e-15);
  const ViewFamily twins({ex.fam[0], ex.fam[0]});
  CHECK(max_abs_diff(geometric_consensus(twins).normalized.logp(), ex.fam[0].logp()) < 1e-15);
  CHECK(max_abs_diff(arithmetic_marginal(twins).logp(), ex.fam[0].logp()) < 1e-15);
}

TEST_CASE("cross-view residual") {
  Example ex;
  const auto g = geometric_consensus(ex.fam);
  const auto j = cross_view_residual(arithmetic_marginal(ex.fam), g.log_unnorm);
  check_vec(j, {0.22314355131420976, 0.41333928659223397, 0.0});

  const ViewFamily twins({ex.fam[1], ex.fam[1]});
  const auto j0 = cross_view_residual(arithmetic_marginal(twins), geometric_consensus(twins).log_unnorm);
  CHECK(j0.cwiseAbs().maxCoeff() <= 1e-12);

  // Small negative rounding is clamped; a real violation is an error.
  Vec lg = ex.p.logp();
  lg[0] += 1e-8;
  CHECK(cross_view_residual(ex.p, lg)[0] == 0.0);
  lg[0] += 1e-3;
  CHECK_THROWS_AS(cross_view_residual(ex.p, lg), ConsistencyError);
}

TEST_CASE("consensus advantage, gate and reconstruction") {
  Example ex;
  const auto s = pool(ex.p, ex.fam);
  check_vec(s.a_geo, {0.69314718055994531, -0.63648283790644372, -1.0986122886681097});
  check_vec(s.c_gate, {0.9999999855730498, 0.65417494397024391, 0.99999999089760782});
  check_vec(s.r_gate, {0.75647078911023563, 0.60627683203725155, 0.99999999089760782});
  check_vec(s.lambda, {0.75647077819666923, 0.39661111262842602, 0.99999998179521572});
  check_vec(s.a_hat, {0.86194875647217396, -0.47254788355805796, -1.0986122886681097});
  check_vec(s.qstar.logp(), {-0.62561527863613712, -1.043821186792214, -2.1807112156682564});
  check_vec(s.qa.probs(), {0.5, 0.4, 0.1});
  CHECK(s.a_hat[1] < 0.0);

  // Neutral teachers: every view equals the student.
  const auto neutral = pool(ex.p, ViewFamily({ex.p, ex.p}));
  CHECK(neutral.a_geo.cwiseAbs().maxCoeff() == 0.0);
  CHECK(neutral.c_gate.cwiseAbs().maxCoeff() == 0.0);
  CHECK(neutral.lambda.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("single view reduces to that view") {
  Rng rng(11);
  for (int i = 0; i < 20; ++i) {
    const auto p = test::random_dist(rng, 6);
    const auto q = test::random_dist(rng, 6);
    const auto s = pool(p, ViewFamily({q}));
    CHECK(max_abs_diff(s.qstar.logp(), q.logp()) < 1e-12);
    CHECK(max_abs_diff(s.a_hat, (q.logp() - p.logp()).eval()) < 1e-12);
    CHECK(s.residual.cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("gate overrides recover the two limits") {
  Rng rng(5);
  for (int i = 0; i < 50; ++i) {
    const auto p = test::random_dist(rng, 8);
    const auto fam = test::random_family(rng, 8, 3, i % 2 == 0);
    const auto closed = pool(p, fam, kDefaultEpsilon, GateOverride::closed);
    const auto open = pool(p, fam, kDefaultEpsilon, GateOverride::open);
    CHECK(max_abs_diff(closed.qstar.probs(), closed.qg.probs()) <= 1e-12);
    CHECK(max_abs_diff(open.qstar.probs(), open.qa.probs()) <= 1e-12);
  }
}

TEST_CASE("pooled signal invariants on random draws") {
  Rng rng(2024);
  for (int i = 0; i < 2000; ++i) {
    const std::size_t n = std::array<std::size_t, 4>{2, 3, 8, 32}[i % 4];
    const std::size_t m = std::array<std::size_t, 4>{1, 2, 3, 5}[(i / 4) % 4];
    const auto p = test::random_dist(rng, n);
    const auto fam = test::random_family(rng, n, m, i % 3 == 0);
    const auto s = pool(p, fam);
    REQUIRE(s.residual.minCoeff() >= 0.0);
    for (Eigen::Index v = 0; v < s.lambda.size(); ++v) {
      REQUIRE(s.c_gate[v] >= 0.0);
      REQUIRE(s.c_gate[v] <= 1.0);
      REQUIRE(s.r_gate[v] >= 0.0);
      REQUIRE(s.r_gate[v] <= 1.0);
      REQUIRE(s.lambda[v] <= 1.0);
      REQUIRE(s.lambda[v] * s.residual[v] <= std::abs(s.a_geo[v]) + 1e-9);
      if (std::abs(s.a_geo[v]) > 1e-12) REQUIRE(s.a_hat[v] * s.a_geo[v] >= 0.0);
    }
    REQUIRE(std::abs(log_sum_exp(s.qstar.logp())) < 1e-9);
  }
}

TEST_CASE("permutation equivariance and view-order invariance") {
  Rng rng(77);
  for (int i = 0; i < 30; ++i) {
    const std::size_t n = 7;
    const auto p = test::random_dist(rng, n);
    const auto fam = test::random_family(rng, n, 3, true);
    const auto base = pool(p, fam);

    std::vector<Eigen::Index> perm(n);
    std::iota(perm.begin(), perm.end(), Eigen::Index{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    auto permute = [&](const Vec& x) {
      Vec y(x.size());
      for (std::size_t k = 0; k < n; ++k) y[static_cast<Eigen::Index>(k)] = x[perm[k]];
      return y;
    };
    std::vector<LogDist> pv;
    for (const auto& v : fam.views()) pv.push_back(LogDist::from_log_probs(permute(v.logp())));
    const auto permuted = pool(LogDist::from_log_probs(permute(p.logp())),
                               ViewFamily(pv, {fam.weights().begin(), fam.weights().end()}));
    CHECK(max_abs_diff(permuted.a_hat, permute(base.a_hat)) < 1e-12);
    CHECK(max_abs_diff(permuted.qstar.logp(), permute(base.qstar.logp())) < 1e-12);

    const ViewFamily reversed({fam[2], fam[1], fam[0]}, {fam.weights()[2], fam.weights()[1], fam.weights()[0]});
    const auto r = pool(p, reversed);
    CHECK(max_abs_diff(r.a_hat, base.a_hat) < 1e-12);
    CHECK(max_abs_diff(r.lambda, base.lambda) < 1e-12);
    CHECK(max_abs_diff(r.qstar.logp(), base.qstar.logp()) < 1e-12);
  }
}

TEST_CASE("weighted family uses the weights everywhere") {
  Example ex;
  const ViewFamily w(ex.fam.views(), {0.25, 0.75});
  const auto s = pool(ex.p, w);
  // 0.25 ln 4 + 0.75 * 0 and 0.25 * 0.8 + 0.75 * 0.2
  CHECK(std::abs(s.a_geo[0] - 0.25 * std::log(4.0)) < 1e-12);
  CHECK(std::abs(s.qa.prob(0) - 0.35) < 1e-12);
}

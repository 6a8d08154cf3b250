#include <doctest.h>
#include <gsl/gsl_errno.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "mrpath/mcem.hpp"
#include "mrpath/parallel.hpp"
#include "mrpath/simulate.hpp"
#include "mrpath/stats.hpp"
#include "unit/helpers.hpp"
#include "unit/q_optimizer.hpp"

using namespace mrpath;

namespace {

SummaryDataset one_snp(const SnpRecord& r) { return SummaryDataset({r}); }

SummaryDataset sim(const char* name, std::size_t p, std::uint64_t seed) {
  PresetOptions o;
  o.p = p;
  o.seed = seed;
  return simulate_dataset(preset(name, o)).dataset;
}

// Builds a sample by hand: weights uniform, responsibilities given per draw.
ImportanceSample manual_sample(const MixtureParams& params, const std::vector<std::vector<double>>& betas,
                               const std::vector<std::vector<std::vector<double>>>& resp) {
  ImportanceSample s;
  s.params = params;
  s.num_snps = betas.size();
  s.draws_per_snp = betas.front().size();
  for (std::size_t i = 0; i < s.num_snps; ++i)
    for (std::size_t j = 0; j < s.draws_per_snp; ++j) {
      s.theta_x.push_back(0.1);
      s.beta.push_back(betas[i][j]);
      s.cluster.push_back(0);
      s.log_weights.push_back(0.0);
      s.norm_weights.push_back(1.0 / static_cast<double>(s.draws_per_snp));
      for (double r : resp[i][j]) s.responsibilities.push_back(r);
    }
  s.ess.assign(s.num_snps, static_cast<double>(s.draws_per_snp));
  return s;
}

SummaryDataset dummy_data(std::size_t p) {
  std::vector<SnpRecord> recs;
  for (std::size_t i = 0; i < p; ++i) recs.push_back({"s" + std::to_string(i), 0.1, 0.01, 0.05, 0.01});
  return SummaryDataset(recs);
}

}  // namespace

TEST_SUITE("mcem") {
  TEST_CASE("normalized weights sum to one and log weights respect the bound") {
    std::mt19937_64 g(3);
    for (int rep = 0; rep < 20; ++rep) {
      std::vector<SnpRecord> recs;
      for (int i = 0; i < 5; ++i) recs.push_back(testing::random_record(g, "s" + std::to_string(i)));
      const SummaryDataset data(recs);
      const auto params = testing::random_params(g, 1 + rep % 3);
      const auto s = e_step(data, params, 200, {static_cast<std::uint64_t>(rep), 0, 0});
      for (std::size_t i = 0; i < data.size(); ++i) {
        const auto w = s.snp_norm_weights(i);
        CHECK(std::accumulate(w.begin(), w.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
        const double bound = -0.5 * std::log(2 * testing::kPi * data[i].sigma_y * data[i].sigma_y);
        for (std::size_t j = 0; j < s.draws_per_snp; ++j) CHECK(s.log_weights[s.index(i, j)] <= bound + 1e-12);
        CHECK(s.ess[i] >= 1.0 - 1e-9);
        CHECK(s.ess[i] <= 200.0 + 1e-9);
      }
    }
  }

  TEST_CASE("tiny cluster variance concentrates beta draws on the mean") {
    MixtureParams p;
    p.weights = {1.0};
    p.means = {0.4};
    p.variances = {1e-10};
    p.exposure_mean = 0.0;
    p.exposure_variance = 0.05;
    const auto s = e_step(one_snp({"a", 0.2, 0.01, 0.3, 0.01}), p, 500, {1, 0, 0});
    for (double b : s.beta) CHECK(std::abs(b - 0.4) < 1e-3);
  }

  TEST_CASE("importance estimate of E[beta] agrees with a grid posterior") {
    const SnpRecord r{"a", 0.15, 0.01, 0.02, 0.01};
    auto params = testing::two_cluster(0.1);
    params.exposure_variance = 0.04;
    const auto s = e_step(one_snp(r), params, 100000, {7, 0, 0});
    double est = 0.0;
    for (std::size_t j = 0; j < s.draws_per_snp; ++j) est += s.norm_weights[j] * s.beta[j];
    double var = 0.0;
    for (std::size_t j = 0; j < s.draws_per_snp; ++j) {
      const double d = s.norm_weights[j] * (s.beta[j] - est);
      var += d * d;
    }
    const double se = std::sqrt(var);
    const double truth = testing::grid_posterior(r, params, 500, 500, -1.2, 1.2).beta_mean();
    CHECK(std::abs(est - truth) < 3.0 * se + 1e-4);
  }

  TEST_CASE("single-draw K=1 estimate equals the complete-data log-likelihood") {
    std::mt19937_64 g(5);
    for (int rep = 0; rep < 10; ++rep) {
      const auto rec = testing::random_record(g);
      const auto params = testing::random_params(g, 1);
      const SummaryDataset data = one_snp(rec);
      const auto s = e_step(data, params, 1, {static_cast<std::uint64_t>(rep), 0, 0});
      const LatentState z = s.latent(0, 0);
      CHECK(q_estimate(s, params, data) == doctest::Approx(snp_complete_loglik(params, rec, z)).epsilon(1e-12));
    }
  }

  TEST_CASE("hard responsibilities and uniform weights give ordinary moments") {
    const MixtureParams start = testing::two_cluster(0.2);
    const std::vector<std::vector<double>> betas{{-0.6, -0.4, 0.3}, {-0.5, 0.7, 0.5}};
    const std::vector<std::vector<std::vector<double>>> resp{
        {{1, 0}, {1, 0}, {0, 1}}, {{1, 0}, {0, 1}, {0, 1}}};
    const auto data = dummy_data(2);
    const auto r = m_step_aligned(manual_sample(start, betas, resp), data);
    CHECK(r.collapsed.empty());
    // cluster 1: {-0.6, -0.4, -0.5}; cluster 2: {0.3, 0.7, 0.5}; each draw weight 1/3.
    CHECK(r.params.weights[0] == doctest::Approx(0.5));
    CHECK(r.params.means[0] == doctest::Approx(-0.5));
    CHECK(r.params.means[1] == doctest::Approx(0.5));
    CHECK(r.params.variances[0] == doctest::Approx(0.02 / 3.0));
    CHECK(r.params.variances[1] == doctest::Approx(0.08 / 3.0));
    CHECK(r.params.exposure_mean == doctest::Approx(0.1));
  }

  TEST_CASE("identical beta draws floor the variance") {
    MixtureParams start;
    start.weights = {1.0};
    start.means = {0.0};
    start.variances = {1.0};
    const auto r = m_step(manual_sample(start, {{0.3, 0.3}, {0.3, 0.3}}, {{{1}, {1}}, {{1}, {1}}}), dummy_data(2));
    CHECK(r.means[0] == doctest::Approx(0.3));
    CHECK(r.variances[0] == kVarianceFloor);
  }

  TEST_CASE("an empty cluster is held and reported") {
    const MixtureParams start = testing::two_cluster(0.2);
    const auto r = m_step_aligned(manual_sample(start, {{-0.6, -0.4}}, {{{1, 0}, {1, 0}}}), dummy_data(1));
    REQUIRE(r.collapsed.size() == 1);
    CHECK(r.collapsed[0] == 1);
    CHECK(r.params.means[1] == start.means[1]);
    CHECK(r.params.variances[1] == start.variances[1]);
    double total = 0.0;
    for (double w : r.params.weights) total += w;
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  }

  TEST_CASE("M-step never decreases the estimated Q on its own sample") {
    std::mt19937_64 g(11);
    for (int rep = 0; rep < 25; ++rep) {
      const auto data = sim(rep % 2 ? "sim1-k2" : "sim1-k3", 40, 100 + rep);
      const auto params = testing::random_params(g, 1 + rep % 3);
      const auto s = e_step(data, params, 100, {static_cast<std::uint64_t>(rep), 0, 0});
      const auto next = m_step_aligned(s, data).params;
      CHECK(q_estimate(s, next, data) >= q_estimate(s, params, data) - 1e-9);
    }
  }

  TEST_CASE("closed-form M-step matches a numerical optimizer") {
    gsl_set_error_handler_off();
    for (std::size_t k = 1; k <= 3; ++k) {
      const auto data = sim("sim1-k2", 30, 40 + k);
      std::mt19937_64 g(k);
      const auto params = testing::random_params(g, k);
      const auto s = e_step(data, params, 100, {k, 0, 0});
      const double closed = q_estimate(s, m_step_aligned(s, data).params, data);
      const double numeric = testing::optimize_q(s, data);
      CHECK(numeric <= closed + 1e-6);
      CHECK(std::abs(numeric - closed) < 1e-6 * std::max(1.0, std::abs(closed)));
    }
  }

  TEST_CASE("M-step output is a stationary point of the estimated Q") {
    const auto data = sim("sim1-k2", 50, 9);
    const auto params = testing::two_cluster(0.15);
    const auto s = e_step(data, params, 200, {1, 0, 0});
    const auto next = m_step_aligned(s, data).params;
    const double h = 1e-5;
    auto q = [&](MixtureParams p) { return q_estimate(s, p, data); };
    for (std::size_t c = 0; c < 2; ++c) {
      auto up = next, dn = next;
      up.means[c] += h;
      dn.means[c] -= h;
      CHECK(std::abs((q(up) - q(dn)) / (2 * h)) < 1e-3);
      up = next;
      dn = next;
      up.variances[c] *= std::exp(h);
      dn.variances[c] *= std::exp(-h);
      CHECK(std::abs((q(up) - q(dn)) / (2 * h)) < 1e-3);
    }
    auto up = next, dn = next;
    up.exposure_mean += h;
    dn.exposure_mean -= h;
    CHECK(std::abs((q(up) - q(dn)) / (2 * h)) < 1e-3);
  }

  TEST_CASE("eta hat squared: hand value and the literal formula") {
    const std::vector<double> w{0.5, 0.5};
    const std::vector<double> l{1.0, -1.0};
    CHECK(eta_hat_squared(w, l, 2) == doctest::Approx(1.0).epsilon(1e-14));

    // Literal form m * sum_i dq_i^2 [ sum (wL)^2 / dq_i^2 - 2 sum w^2 L / dq_i + sum w^2 ]
    std::mt19937_64 g(2);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const std::size_t p = 4, m = 7;
    std::vector<double> ws(p * m), ls(p * m);
    for (std::size_t i = 0; i < p; ++i) {
      double tot = 0.0;
      for (std::size_t j = 0; j < m; ++j) tot += ws[i * m + j] = 0.1 + u(g);
      for (std::size_t j = 0; j < m; ++j) {
        ws[i * m + j] /= tot;
        ls[i * m + j] = -1.0 + 3.0 * u(g);
      }
    }
    double literal = 0.0;
    for (std::size_t i = 0; i < p; ++i) {
      double dq = 0.0, a = 0.0, b = 0.0, c = 0.0;
      for (std::size_t j = 0; j < m; ++j) dq += ws[i * m + j] * ls[i * m + j];
      for (std::size_t j = 0; j < m; ++j) {
        const double wi = ws[i * m + j], li = ls[i * m + j];
        a += wi * wi * li * li;
        b += wi * wi * li;
        c += wi * wi;
      }
      literal += dq * dq * (a / (dq * dq) - 2.0 * b / dq + c);
    }
    literal *= static_cast<double>(m);
    CHECK(std::abs(eta_hat_squared(ws, ls, m) - literal) < 1e-12 * std::max(1.0, literal));
    CHECK_THROWS_AS(eta_hat_squared(ws, ls, 5), ConfigError);
  }

  TEST_CASE("identical parameters give zero change and are not accepted") {
    const auto data = sim("sim1-k2", 20, 3);
    const auto params = testing::two_cluster();
    const auto s = e_step(data, params, 100, {1, 0, 0});
    const auto r = delta_q_test(s, params, params, data, 0.1);
    CHECK(r.delta_q == 0.0);
    CHECK(r.eta_hat == 0.0);
    CHECK(r.eta_degenerate);
    CHECK_FALSE(r.accepted);
  }

  TEST_CASE("convergence rule examples") {
    // upper z for 0.05 is 1.6449
    CHECK(check_convergence(0.0, 0.0, 100, 0.05, 0.005));
    CHECK_FALSE(check_convergence(0.01, 0.0, 100, 0.05, 0.005));
    CHECK(check_convergence(0.001, 0.01, 100, 0.05, 0.005));  // 0.001 + 0.0016449 < 0.005
    CHECK_FALSE(check_convergence(0.001, 0.03, 100, 0.05, 0.005));  // 0.001 + 0.0049346 > 0.005
    CHECK(check_convergence(0.004, 2.6e-5, 1, 0.05, 0.005, EtaScaling::kLiteralM));
    CHECK_FALSE(check_convergence(0.004, 0.7, 1, 0.05, 0.005, EtaScaling::kLiteralM));
    CHECK_THROWS_AS(check_convergence(0.0, 0.0, 0, 0.05, 0.005), ConfigError);
  }

  TEST_CASE("ascent test is calibrated when the true change is zero") {
    // K = 1 with only the mean moving: the expected change is zero exactly
    // when mu_new + mu_old = 2 * average posterior mean of beta.
    std::vector<SnpRecord> recs{{"a", 0.12, 0.01, 0.05, 0.01}, {"b", -0.2, 0.015, -0.08, 0.01},
                                {"c", 0.3, 0.02, 0.15, 0.02}};
    const SummaryDataset data(recs);
    MixtureParams old;
    old.weights = {1.0};
    old.means = {0.2};
    old.variances = {0.04};
    old.exposure_mean = 0.0;
    old.exposure_variance = 0.05;
    double mean_post = 0.0;
    for (const auto& r : recs) mean_post += testing::grid_posterior(r, old, 400, 600, -1.0, 1.5).beta_mean();
    mean_post /= 3.0;
    MixtureParams next = old;
    next.means[0] = 2.0 * mean_post - old.means[0];

    const double alpha = 0.10;
    int accepted = 0;
    const int trials = 2000;
    for (int t = 0; t < trials; ++t) {
      const auto s = e_step(data, old, 400, {99, 0, static_cast<std::uint64_t>(t)});
      accepted += delta_q_test(s, next, old, data, alpha).accepted;
    }
    const double rate = static_cast<double>(accepted) / trials;
    MESSAGE("acceptance rate under the null: " << rate);
    CHECK(rate <= alpha + 0.02);
  }

  TEST_CASE("fits are reproducible and independent of the thread count") {
    const auto data = sim("sim1-k2", 60, 21);
    McemConfig cfg;
    cfg.n_restarts = 2;
    cfg.seed = 4;
    set_worker_count(1);
    const auto a = fit(data, 2, cfg);
    set_worker_count(3);
    const auto b = fit(data, 2, cfg);
    const auto c = fit(data, 2, cfg);
    set_worker_count(0);
    CHECK(a.params == b.params);
    CHECK(b.params == c.params);
    CHECK(a.q_final == b.q_final);
    REQUIRE(a.trace.size() == b.trace.size());
    for (std::size_t t = 0; t < a.trace.size(); ++t) CHECK(a.trace[t].params == b.trace[t].params);
  }

  TEST_CASE("input order does not change the fit") {
    const auto data = sim("sim1-k2", 60, 22);
    std::vector<SnpRecord> recs(data.begin(), data.end());
    std::mt19937_64 g(8);
    std::shuffle(recs.begin(), recs.end(), g);
    McemConfig cfg;
    cfg.n_restarts = 2;
    const auto a = fit(data, 2, cfg);
    const auto b = fit(SummaryDataset(recs), 2, cfg);
    CHECK(a.params == b.params);
    CHECK(a.q_final == b.q_final);
  }

  TEST_CASE("fit output is canonical and the trace is consistent") {
    const auto data = sim("sim1-k3", 80, 5);
    McemConfig cfg;
    cfg.n_restarts = 2;
    const auto f = fit(data, 3, cfg);
    CHECK(f.params.is_canonical());
    CHECK_NOTHROW(f.params.validate());
    CHECK(f.chains.size() == 2);
    REQUIRE_FALSE(f.trace.empty());
    std::size_t prev_m = 0;
    for (const auto& t : f.trace) {
      CHECK(t.params.is_canonical());
      CHECK(t.mc_size >= prev_m);
      prev_m = t.mc_size;
    }
    if (f.converged) CHECK(f.trace.back().stopping);
  }

  TEST_CASE("accepted iterations rarely decrease the true Q") {
    int steps = 0, negative = 0;
    for (std::uint64_t rep = 0; rep < 12; ++rep) {
      const auto data = sim("sim1-k2", 60, 300 + rep);
      McemConfig cfg;
      cfg.n_restarts = 1;
      cfg.seed = rep;
      const auto start = initial_params(data, 2, rep, 0);
      const auto f = fit_from(data, start, cfg);
      MixtureParams prev = start;
      for (const auto& t : f.trace) {
        if (!t.accepted) break;
        // Fresh, larger sample at the previous point to approximate the true change.
        const auto s = e_step(data, prev, 10 * t.mc_size, {rep + 1000, 0, t.iteration});
        const auto d = delta_q_test(s, t.params, prev, data, 0.1);
        ++steps;
        negative += d.delta_q < 0.0;
        prev = t.params;
      }
    }
    MESSAGE("accepted steps " << steps << ", negative " << negative);
    REQUIRE(steps > 0);
    CHECK(static_cast<double>(negative) / steps <= 0.10 + 0.03);
  }

  TEST_CASE("fitted parameters are a fixed point up to Monte-Carlo noise") {
    const auto data = sim("sim1-k2", 100, 77);
    McemConfig cfg;
    cfg.n_restarts = 2;
    const auto f = fit(data, 2, cfg);
    REQUIRE(f.converged);
    const std::size_t reps = 5;
    std::vector<std::vector<double>> moves(5);
    for (std::size_t r = 0; r < reps; ++r) {
      const auto s = e_step(data, f.params, f.final_mc_size, {123, 0, r});
      const auto next = m_step_aligned(s, data).params;
      moves[0].push_back(next.means[0] - f.params.means[0]);
      moves[1].push_back(next.means[1] - f.params.means[1]);
      moves[2].push_back(next.weights[0] - f.params.weights[0]);
      moves[3].push_back(next.variances[0] - f.params.variances[0]);
      moves[4].push_back(next.exposure_mean - f.params.exposure_mean);
    }
    for (const auto& mv : moves) {
      const double mean = stats::mean(mv);
      const double sd = stats::stddev(mv);
      CHECK(std::abs(mean) <= 5.0 * sd + 1e-9);
    }
  }

  TEST_CASE("invalid configurations are rejected") {
    McemConfig c;
    c.m0 = 10;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = {};
    c.alpha = 1.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = {};
    c.epsilon = -1.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = {};
    CHECK(c.epsilon_for(200) == doctest::Approx(1.0));
    CHECK_THROWS_AS(initial_params(dummy_data(3), 0, 1, 0), ConfigError);
  }
}

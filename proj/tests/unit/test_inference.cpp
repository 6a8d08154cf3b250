#include <doctest.h>

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "mrpath/inference.hpp"
#include "mrpath/mcem.hpp"
#include "mrpath/rng.hpp"
#include "mrpath/simulate.hpp"
#include "mrpath/stats.hpp"
#include "unit/helpers.hpp"

using namespace mrpath;

namespace {

double loglik_at(const Eigen::VectorXd& x, std::size_t k, const SnpRecord& r, const LatentState& z) {
  return snp_complete_loglik(from_unconstrained(x, k), r, z);
}

LatentState random_latent(std::mt19937_64& g, std::size_t k) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  return {-0.3 + 0.6 * u(g), -1.0 + 2.0 * u(g), static_cast<std::size_t>(u(g) * static_cast<double>(k)) % k};
}

SummaryDataset sim(const char* name, std::size_t p, std::uint64_t seed) {
  PresetOptions o;
  o.p = p;
  o.seed = seed;
  return simulate_dataset(preset(name, o)).dataset;
}

}  // namespace

TEST_SUITE("inference") {
  TEST_CASE("free coordinates round trip") {
    std::mt19937_64 g(1);
    for (int rep = 0; rep < 30; ++rep) {
      const auto p = testing::random_params(g, 1 + rep % 4);
      const auto back = from_unconstrained(to_unconstrained(p), p.num_clusters());
      for (std::size_t c = 0; c < p.num_clusters(); ++c) {
        CHECK(back.weights[c] == doctest::Approx(p.weights[c]).epsilon(1e-12));
        CHECK(back.means[c] == doctest::Approx(p.means[c]).epsilon(1e-12));
        CHECK(back.variances[c] == doctest::Approx(p.variances[c]).epsilon(1e-12));
      }
      CHECK(back.exposure_variance == doctest::Approx(p.exposure_variance).epsilon(1e-12));
    }
    CHECK(free_parameter_names(2) == std::vector<std::string>{"logit_pi_1", "mu_1", "mu_2", "log_sigma2_1",
                                                              "log_sigma2_2", "exposure_mean",
                                                              "log_exposure_variance"});
    CHECK_THROWS_AS(from_unconstrained(Eigen::VectorXd::Zero(3), 2), ConfigError);
  }

  TEST_CASE("mean coordinates have zero gradient at the means") {
    auto p = testing::two_cluster(0.2);
    p.exposure_mean = 0.1;
    const auto sh = score_and_hessian(p, {0.1, 0.5, 1}, {"a", 0.1, 0.01, 0.05, 0.01});
    CHECK(sh.gradient(2) == 0.0);   // mu_2
    CHECK(sh.gradient(1) == 0.0);   // mu_1 (other cluster)
    CHECK(sh.gradient(5) == 0.0);   // exposure mean
    CHECK(sh.gradient(4) == doctest::Approx(-0.5));  // log sigma2_2 at zero residual
    CHECK(sh.gradient(0) == doctest::Approx(-0.5));  // logit pi_1 with xi = 2
  }

  TEST_CASE("analytic score and Hessian match finite differences") {
    std::mt19937_64 g(2);
    for (int rep = 0; rep < 100; ++rep) {
      const std::size_t k = 1 + rep % 3;
      const auto p = testing::random_params(g, k);
      const auto r = testing::random_record(g);
      const auto z = random_latent(g, k);
      const auto sh = score_and_hessian(p, z, r);
      const Eigen::VectorXd x = to_unconstrained(p);
      const auto d = x.size();
      const double h = 1e-5;
      for (Eigen::Index a = 0; a < d; ++a) {
        Eigen::VectorXd up = x, dn = x;
        up(a) += h;
        dn(a) -= h;
        const double fd = (loglik_at(up, k, r, z) - loglik_at(dn, k, r, z)) / (2 * h);
        CHECK(std::abs(fd - sh.gradient(a)) < 1e-5 * std::max(1.0, std::abs(fd)));
        const auto gu = score_and_hessian(from_unconstrained(up, k), z, r).gradient;
        const auto gd = score_and_hessian(from_unconstrained(dn, k), z, r).gradient;
        const Eigen::VectorXd col = (gu - gd) / (2 * h);
        for (Eigen::Index b = 0; b < d; ++b)
          CHECK(std::abs(col(b) - sh.hessian(b, a)) < 1e-4 * std::max(1.0, std::abs(col(b))));
      }
      CHECK((sh.hessian - sh.hessian.transpose()).norm() == 0.0);
    }
  }

  TEST_CASE("cross-SNP term matches the double sum") {
    std::mt19937_64 g(3);
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<Eigen::VectorXd> s(20, Eigen::VectorXd(7));
    for (auto& v : s)
      for (Eigen::Index a = 0; a < 7; ++a) v(a) = n(g);
    Eigen::MatrixXd brute = Eigen::MatrixXd::Zero(7, 7);
    for (std::size_t i = 0; i < s.size(); ++i)
      for (std::size_t j = 0; j < s.size(); ++j)
        if (i != j) brute += s[i] * s[j].transpose();
    CHECK((cross_snp_term(s) - brute).cwiseAbs().maxCoeff() < 1e-10);
  }

  TEST_CASE("a single point-mass draw gives minus the Hessian") {
    std::mt19937_64 g(4);
    const auto r = testing::random_record(g);
    const auto p = testing::random_params(g, 1);
    const SummaryDataset data({r});
    const auto sample = e_step(data, p, 1, {1, 0, 0});
    const auto info = observed_information(p, data, sample);
    const auto sh = score_and_hessian(p, sample.latent(0, 0), r);
    CHECK((info.matrix + sh.hessian).cwiseAbs().maxCoeff() < 1e-10);
  }

  TEST_CASE("information agrees with brute-force Louis formula") {
    // Explicit double sum over SNPs and draws with cluster labels integrated out.
    const auto data = sim("sim1-k2", 20, 5);
    const auto p = testing::two_cluster(0.12);
    const auto s = e_step(data, p, 30, {2, 0, 0});
    const std::size_t d = 7, k = 2;
    Eigen::MatrixXd neg_h = Eigen::MatrixXd::Zero(d, d), second = Eigen::MatrixXd::Zero(d, d);
    std::vector<Eigen::VectorXd> mean(data.size(), Eigen::VectorXd::Zero(d));
    for (std::size_t i = 0; i < data.size(); ++i)
      for (std::size_t j = 0; j < s.draws_per_snp; ++j) {
        const double w = s.norm_weights[s.index(i, j)];
        const auto r = s.draw_responsibilities(i, j);
        for (std::size_t c = 0; c < k; ++c) {
          const auto sh = score_and_hessian(p, {s.theta_x[s.index(i, j)], s.beta[s.index(i, j)], c}, data[i]);
          neg_h -= w * r[c] * sh.hessian;
          second += w * r[c] * sh.gradient * sh.gradient.transpose();
          mean[i] += w * r[c] * sh.gradient;
        }
      }
    Eigen::MatrixXd cross = Eigen::MatrixXd::Zero(d, d);
    Eigen::VectorXd total = Eigen::VectorXd::Zero(d);
    for (std::size_t i = 0; i < data.size(); ++i) {
      total += mean[i];
      for (std::size_t n = 0; n < data.size(); ++n)
        if (n != i) cross += mean[i] * mean[n].transpose();
    }
    const Eigen::MatrixXd expected = neg_h - second - cross + total * total.transpose();
    const auto info = observed_information(p, data, s);
    CHECK((info.matrix - expected).cwiseAbs().maxCoeff() < 1e-8 * std::max(1.0, expected.cwiseAbs().maxCoeff()));
    CHECK((info.matrix - info.matrix.transpose()).norm() == 0.0);
    CHECK((info.score_mean - total).cwiseAbs().maxCoeff() < 1e-9);
  }

  TEST_CASE("streamed information equals the stored-sample estimate") {
    const auto data = sim("sim1-k2", 15, 6).sorted_by_id();
    const auto p = testing::two_cluster(0.1);
    const auto a = estimate_information(p, data, 200, 9);
    const auto s = e_step(data, p, 200, {9, 0, 0, rng::kInformation});
    const auto b = observed_information(p, data, s);
    CHECK((a.matrix - b.matrix).cwiseAbs().maxCoeff() < 1e-8 * std::max(1.0, b.matrix.cwiseAbs().maxCoeff()));
  }

  TEST_CASE("score vanishes at the maximizer of the estimated Q") {
    const auto data = sim("sim1-k2", 40, 7);
    const auto start = testing::two_cluster(0.15);
    const auto s = e_step(data, start, 100, {3, 0, 0});
    const auto next = m_step_aligned(s, data).params;
    const auto info = observed_information(next, data, s);
    CHECK(info.score_mean.cwiseAbs().maxCoeff() < 1e-7);
  }

  TEST_CASE("diagonal information gives the textbook interval") {
    MixtureParams p;
    p.weights = {1.0};
    p.means = {0.3};
    p.variances = {0.01};
    p.exposure_mean = 0.0;
    p.exposure_variance = 0.04;
    InformationMatrix info;
    info.matrix = 100.0 * Eigen::MatrixXd::Identity(4, 4);
    const auto ci = confidence_intervals(info, p, 0.95);
    const auto* mu = ci.find("mu_1");
    REQUIRE(mu);
    CHECK(mu->se == doctest::Approx(0.1));
    CHECK(mu->lower == doctest::Approx(0.3 - 0.195996).epsilon(1e-5));
    CHECK(mu->upper == doctest::Approx(0.3 + 0.195996).epsilon(1e-5));
    const auto* s2 = ci.find("sigma2_1");
    REQUIRE(s2);
    CHECK(s2->scale == "log");
    CHECK(s2->lower == doctest::Approx(0.01 * std::exp(-0.195996)).epsilon(1e-5));
    CHECK(s2->lower > 0.0);
    CHECK(ci.find("pi_1") == nullptr);
    CHECK(ci.find("exposure_variance"));
  }

  TEST_CASE("weight intervals stay inside the unit interval") {
    auto p = testing::two_cluster(0.1);
    p.weights = {0.97, 0.03};
    InformationMatrix info;
    info.matrix = Eigen::MatrixXd::Identity(7, 7);
    const auto ci = confidence_intervals(info, p);
    for (const auto& e : ci.entries)
      if (e.name.starts_with("pi_")) {
        CHECK(e.lower >= 0.0);
        CHECK(e.upper <= 1.0);
        CHECK(e.se == doctest::Approx(0.97 * 0.03));
      }
  }

  TEST_CASE("a singular matrix is reported with the offending coordinate") {
    auto p = testing::two_cluster(0.1);
    InformationMatrix info;
    info.matrix = Eigen::MatrixXd::Identity(7, 7);
    info.matrix(2, 2) = 0.0;
    try {
      (void)confidence_intervals(info, p);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(std::string(e.what()).find("mu_2") != std::string::npos);
    }
    CHECK_THROWS_AS(confidence_intervals(info, p, 1.5), ConfigError);
  }

  TEST_CASE("standard errors are stable when the information sample doubles") {
    const auto data = sim("sim1-k2", 200, 8).sorted_by_id();
    McemConfig cfg;
    cfg.n_restarts = 2;
    const auto f = fit(data, 2, cfg);
    const auto a = confidence_intervals(estimate_information(f.params, data, 2000, 1), f.params);
    const auto b = confidence_intervals(estimate_information(f.params, data, 4000, 2), f.params);
    for (std::size_t e = 0; e < a.entries.size(); ++e)
      CHECK(std::abs(a.entries[e].se - b.entries[e].se) <= 0.10 * b.entries[e].se);
  }

  TEST_CASE("standard errors match the sampling spread for a single cluster") {
    // Empirical SD of mu_hat across replications against the mean reported SE.
    const int reps = 100;
    std::vector<double> est, se;
    for (int r = 0; r < reps; ++r) {
      PresetOptions o;
      o.p = 300;
      o.seed = 5000 + static_cast<std::uint64_t>(r);
      const auto data = simulate_dataset(preset("sim1-k1", o)).dataset;
      McemConfig cfg;
      cfg.n_restarts = 1;
      cfg.seed = static_cast<std::uint64_t>(r);
      auto f = fit(data, 1, cfg);
      attach_intervals(f, data, static_cast<std::uint64_t>(r));
      if (!f.intervals) continue;
      est.push_back(f.params.means[0]);
      se.push_back(f.intervals->find("mu_1")->se);
    }
    REQUIRE(est.size() >= 95);
    const double sd = stats::stddev(est), mean_se = stats::mean(se);
    MESSAGE("empirical sd " << sd << ", mean se " << mean_se);
    CHECK(std::abs(mean_se / sd - 1.0) < 0.15);
  }
}

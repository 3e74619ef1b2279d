#include "doctest.h"

#include <cmath>
#include <numeric>
#include <vector>

#include "pnrtomo/errors.hpp"
#include "pnrtomo/photon_stats.hpp"

using namespace pnrtomo;

namespace {

// exp(-1) by its alternating series in long double.
long double exp_minus_one() {
  long double s = 0.0L, term = 1.0L;
  for (int k = 0; k < 40; ++k) {
    s += term;
    term *= -1.0L / static_cast<long double>(k + 1);
  }
  return s;
}

// Poisson pmf by forward recursion in long double (independent of lgamma).
std::vector<long double> poisson_recursive(long double mu, int upto) {
  std::vector<long double> p(static_cast<std::size_t>(upto) + 1);
  p[0] = std::exp(-mu);
  for (int m = 1; m <= upto; ++m) p[static_cast<std::size_t>(m)] = p[static_cast<std::size_t>(m) - 1] * mu / m;
  return p;
}

// Column of a binomial POVM by enumerating every subset of detected photons.
std::vector<double> enumerate_losses(int m, double eta, int outcomes) {
  std::vector<double> col(static_cast<std::size_t>(outcomes), 0.0);
  for (unsigned mask = 0; mask < (1u << m); ++mask) {
    double p = 1.0;
    int k = 0;
    for (int b = 0; b < m; ++b) {
      if (mask & (1u << b)) {
        p *= eta;
        ++k;
      } else {
        p *= 1.0 - eta;
      }
    }
    col[static_cast<std::size_t>(std::min(k, outcomes - 1))] += p;
  }
  return col;
}

}  // namespace

TEST_CASE("poisson pmf at the zero-intensity edge") {
  CHECK(poisson_pmf(0.0, 0) == 1.0);
  CHECK(poisson_pmf(0.0, 1) == 0.0);
  CHECK(poisson_pmf(0.0, 57) == 0.0);
}

TEST_CASE("poisson pmf matches a series evaluation of exp(-1)") {
  const double oracle = static_cast<double>(exp_minus_one());
  CHECK(poisson_pmf(1.0, 1) == doctest::Approx(oracle).epsilon(1e-14));
  CHECK(poisson_pmf(1.0, 0) == doctest::Approx(oracle).epsilon(1e-14));
}

TEST_CASE("poisson pmf sums to one for the brightest probe") {
  long double s = 0.0L;
  for (std::uint64_t m = 0; m <= 400; ++m) s += poisson_pmf(130.0, m);
  CHECK(std::abs(static_cast<double>(s) - 1.0) < 1e-12);
}

TEST_CASE("poisson pmf stays accurate far out in m") {
  const auto ref = poisson_recursive(500.0L, 700);
  for (int m : {0, 100, 450, 500, 560, 700}) {
    const double got = poisson_pmf(500.0, static_cast<std::uint64_t>(m));
    const double want = static_cast<double>(ref[static_cast<std::size_t>(m)]);
    if (want < 1e-300) {
      CHECK(got < 1e-290);
    } else {
      CHECK(got == doctest::Approx(want).epsilon(1e-11));
    }
  }
}

TEST_CASE("poisson pmf rejects a negative mean") {
  CHECK_THROWS_AS(poisson_pmf(-0.1, 0), DomainError);
  CHECK_THROWS_AS(poisson_upper_tail(-1.0, 2), DomainError);
}

TEST_CASE("poisson upper tail agrees with summation on both sides of the mode") {
  for (double mu : {0.3, 4.0, 31.0, 130.0}) {
    const auto ref = poisson_recursive(mu, 800);
    for (std::uint64_t from : {0ull, 1ull, 3ull, 11ull, 140ull}) {
      long double s = 0.0L;
      for (std::size_t m = from; m < ref.size(); ++m) s += ref[m];
      const double got = poisson_upper_tail(mu, from);
      CHECK(got == doctest::Approx(static_cast<double>(s)).epsilon(1e-10).scale(1e-300));
    }
  }
}

TEST_CASE("probe q matrix columns and tail diagnostics") {
  const ProbeEnsemble single({Probe{1, 0.0, std::nullopt, 10}});
  const auto q0 = probe_q_matrix(single, 5);
  CHECK(q0.q(0, 0) == 1.0);
  for (int m = 1; m < 5; ++m) CHECK(q0.q(m, 0) == 0.0);
  CHECK(q0.tail_mass[0] == 0.0);

  const ProbeEnsemble two({Probe{1, 130.0, std::nullopt, 10}, Probe{2, 6.5, std::nullopt, 10}});
  const auto q = probe_q_matrix(two, 140);
  CHECK(q.tail_mass[1] < 1e-12);

  const auto ref = poisson_recursive(130.0L, 900);
  long double tail = 0.0L;
  for (std::size_t m = 140; m < ref.size(); ++m) tail += ref[m];
  CHECK(q.tail_mass[0] > 0.0);
  CHECK(q.tail_mass[0] == doctest::Approx(static_cast<double>(tail)).epsilon(1e-9));
}

TEST_CASE("tail policies") {
  const Vector lump = probe_q_column(130.0, 140, TailPolicy::LumpIntoLast);
  const Vector ren = probe_q_column(130.0, 140, TailPolicy::Renormalize);
  CHECK(lump.sum() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(ren.sum() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(lump(139) > ren(139));
  // Renormalisation is skipped when the tail is negligible.
  const Vector small = probe_q_column(6.5, 140, TailPolicy::Renormalize);
  CHECK(small(3) == poisson_pmf(6.5, 3));
}

TEST_CASE("binomial povm limiting detectors") {
  const auto ideal = binomial_povm(1.0, 6, 10);
  for (int m = 0; m < 10; ++m)
    for (int n = 0; n < 6; ++n) {
      const double want = n < 5 ? (n == m ? 1.0 : 0.0) : (m >= 5 ? 1.0 : 0.0);
      CHECK(ideal(n, m) == want);
    }
  const auto blind = binomial_povm(0.0, 6, 10);
  for (int m = 0; m < 10; ++m) {
    CHECK(blind(0, m) == 1.0);
    for (int n = 1; n < 6; ++n) CHECK(blind(n, m) == 0.0);
  }
}

TEST_CASE("binomial povm half efficiency, two photons, one click") {
  const auto b = binomial_povm(0.5, 4, 3);
  // Loss patterns of two photons: {both lost, first kept, second kept, both kept}.
  CHECK(b(1, 2) == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("binomial povm equals enumeration of loss patterns") {
  for (double eta : {0.051, 0.3, 0.77}) {
    const int n_out = 8;
    const auto b = binomial_povm(eta, n_out, 13);
    for (int m = 0; m <= 12; ++m) {
      const auto col = enumerate_losses(m, eta, n_out);
      // The cumulative row is 1 - sum, so compare on an absolute scale.
      for (int n = 0; n < n_out; ++n) CHECK(std::abs(b(n, m) - col[static_cast<std::size_t>(n)]) < 1e-14);
    }
  }
}

TEST_CASE("binomial povm rejects efficiencies outside [0, 1]") {
  CHECK_THROWS_AS(binomial_povm(-0.01, 4, 4), DomainError);
  CHECK_THROWS_AS(binomial_povm(1.01, 4, 4), DomainError);
  CHECK_THROWS_AS(binomial_povm(std::nan(""), 4, 4), DomainError);
}

TEST_CASE("dark-count povm") {
  SUBCASE("no background reproduces the binomial model") {
    const auto a = dark_count_povm({0.051, 0.0}, 12, 140);
    const auto b = binomial_povm(0.051, 12, 140);
    CHECK((a.entries() - b.entries()).cwiseAbs().maxCoeff() <= 1e-15);
  }
  SUBCASE("blind detector reports pure background") {
    const auto d = dark_count_povm({0.0, 0.1}, 6, 20);
    const auto bg = poisson_count_distribution(0.1, 6);
    for (int m = 0; m < 20; ++m)
      for (int n = 0; n < 6; ++n) CHECK(std::abs(d(n, m) - bg[static_cast<std::size_t>(n)]) < 1e-15);
  }
  SUBCASE("hand convolution of the two background terms") {
    const auto d = dark_count_povm({0.5, 0.1}, 6, 4);
    // j = 0: exp(-0.1) * B(1|1) ; j = 1: exp(-0.1) * 0.1 * B(0|1)
    const double want = std::exp(-0.1) * (0.5 + 0.1 * 0.5);
    CHECK(d(1, 1) == doctest::Approx(want).epsilon(1e-14));
    CHECK(d(1, 1) == doctest::Approx(0.49767).epsilon(1e-5));
  }
  SUBCASE("negative background is rejected") {
    CHECK_THROWS_AS(dark_count_povm({0.5, -0.03}, 6, 4), DomainError);
  }
}

TEST_CASE("every generated povm is column-stochastic") {
  for (double eta : {0.0, 0.051, 0.5, 1.0})
    for (double gamma : {0.0, 0.2, 3.0}) {
      const auto p = dark_count_povm({eta, gamma}, 12, 140);
      CHECK(p.max_column_defect() <= 1e-9);
      CHECK(p.entries().minCoeff() >= 0.0);
    }
}

TEST_CASE("povm matrix validation") {
  Matrix bad(2, 2);
  bad << 0.5, 1.0, 0.6, 0.0;
  CHECK_THROWS_AS(PovmMatrix{bad}, DomainError);
  Matrix neg(2, 1);
  neg << 1.1, -0.1;
  CHECK_THROWS_AS(PovmMatrix{neg}, DomainError);
}

TEST_CASE("predicted distributions") {
  SUBCASE("ideal detector returns the probe statistics") {
    const auto r = predict_distribution(binomial_povm(1.0, 12, 140), 1.0).distribution;
    const auto want = poisson_count_distribution(1.0, 12);
    for (std::size_t n = 0; n < 12; ++n) CHECK(r[n] == doctest::Approx(want[n]).epsilon(1e-12).scale(1e-16));
  }
  SUBCASE("thinned probe at mu = 31") {
    const auto r = predict_distribution(binomial_povm(0.051, 12, 140), 31.0).distribution;
    for (std::size_t n = 0; n < 11; ++n) CHECK(r[n] == doctest::Approx(poisson_pmf(1.581, n)).epsilon(1e-9));
  }
  SUBCASE("vacuum probe reads off column zero") {
    Matrix e = Matrix::Zero(3, 4);
    e.row(0).setConstant(0.2);
    e.row(1).setConstant(0.3);
    e.row(2).setConstant(0.5);
    e(0, 0) = 0.7;
    e(2, 0) = 0.0;
    const auto r = predict_distribution(PovmMatrix(e), 0.0);
    CHECK(r.distribution[0] == 0.7);
    CHECK(r.distribution[1] == 0.3);
    CHECK(r.distribution[2] == 0.0);
    CHECK(r.tail_mass == 0.0);
  }
}

TEST_CASE("thinning composition law across a grid") {
  for (double eta : {0.0, 0.051, 0.5, 1.0})
    for (double mu : {0.0, 0.7, 5.0, 20.0, 50.0}) {
      const int m_cnt = static_cast<int>(std::ceil(mu + 10.0 * std::sqrt(mu))) + 2;
      const auto r = predict_distribution(binomial_povm(eta, 12, m_cnt), mu).distribution;
      const auto l = linear_prediction(eta, mu, 12);
      for (std::size_t n = 0; n < 12; ++n) CHECK(std::abs(r[n] - l[n]) < 1e-6);
    }
}

TEST_CASE("linear prediction") {
  const auto blind = linear_prediction(0.0, 40.0, 12);
  CHECK(blind[0] == 1.0);
  CHECK(std::accumulate(blind.probs.begin() + 1, blind.probs.end(), 0.0) == 0.0);

  const auto l = linear_prediction(0.051, 87.0, 12);
  for (std::size_t n = 0; n < 11; ++n) CHECK(l[n] == doctest::Approx(poisson_pmf(4.437, n)).epsilon(1e-12));
  CHECK(std::accumulate(l.probs.begin(), l.probs.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-14));

  const auto one = linear_prediction(1.0, 1.0, 12);
  for (std::size_t n = 0; n < 11; ++n) CHECK(one[n] == doctest::Approx(poisson_pmf(1.0, n)));
}

TEST_CASE("column fidelity") {
  const auto a = binomial_povm(0.3, 5, 8);
  const auto b = binomial_povm(0.6, 5, 8);
  for (int m = 0; m < 8; ++m) CHECK(column_fidelity(a, a, m) == doctest::Approx(1.0).epsilon(1e-14));

  Matrix e1(2, 1), e2(2, 1), e3(2, 1);
  e1 << 1.0, 0.0;
  e2 << 0.0, 1.0;
  e3 << 0.5, 0.5;
  CHECK(column_fidelity(PovmMatrix(e1), PovmMatrix(e2), 0) == 0.0);
  CHECK(column_fidelity(PovmMatrix(e3), PovmMatrix(e1), 0) == doctest::Approx(0.70711).epsilon(1e-5));

  SUBCASE("symmetric and below one for distinct columns") {
    for (int m = 1; m < 8; ++m) {
      const double f = column_fidelity(a, b, m);
      CHECK(f == column_fidelity(b, a, m));
      CHECK(f < 1.0);
      CHECK(f >= 0.0);
    }
  }
  SUBCASE("invariant under relabelling the outcomes") {
    Eigen::PermutationMatrix<Eigen::Dynamic> perm(5);
    perm.indices() << 3, 0, 4, 1, 2;
    const PovmMatrix pa(perm * a.entries()), pb(perm * b.entries());
    for (int m = 0; m < 8; ++m) CHECK(column_fidelity(pa, pb, m) == doctest::Approx(column_fidelity(a, b, m)).epsilon(1e-14));
  }
  SUBCASE("shape mismatch") {
    CHECK_THROWS_AS(column_fidelity(a, binomial_povm(0.3, 6, 8), 0), ShapeError);
  }
}

TEST_CASE("distribution distance") {
  const auto same = distribution_distance({{0.2, 0.8}}, {{0.2, 0.8}});
  CHECK(same.max == 0.0);
  CHECK(same.total_variation == 0.0);

  const auto opposite = distribution_distance({{1.0, 0.0}}, {{0.0, 1.0}});
  CHECK(opposite.abs_diff == std::vector<double>{1.0, 1.0});
  CHECK(opposite.total_variation == 1.0);

  const auto near = distribution_distance({{0.6, 0.4}}, {{0.5, 0.5}});
  CHECK(near.abs_diff[0] == doctest::Approx(0.1));
  CHECK(near.abs_diff[1] == doctest::Approx(0.1));
  CHECK(near.total_variation == doctest::Approx(0.1));

  CHECK_THROWS_AS(distribution_distance({{1.0}}, {{0.5, 0.5}}), ShapeError);
}

TEST_CASE("probe ensemble invariants") {
  CHECK_THROWS_AS(ProbeEnsemble(std::vector<Probe>{}), DomainError);
  CHECK_THROWS_AS(ProbeEnsemble({Probe{1, -1.0, std::nullopt, 10}}), DomainError);
  CHECK_THROWS_AS(ProbeEnsemble({Probe{1, 1.0, std::nullopt, 10}, Probe{1, 2.0, std::nullopt, 10}}), DomainError);
  CHECK_THROWS_AS(ProbeEnsemble({Probe{1, 1.0, std::nullopt, 0}}), DomainError);
  // More attenuation must not give more light.
  CHECK_THROWS_AS(ProbeEnsemble({Probe{1, 5.0, 60.0, 10}, Probe{2, 9.0, 70.0, 10}}), DomainError);

  const auto e = ProbeEnsemble::paper_default();
  REQUIRE(e.size() == 20);
  CHECK(e[0].mean_photons == 130.0);
  CHECK(e[19].mean_photons == 6.5);
  for (std::size_t j = 1; j < 20; ++j) {
    CHECK(e[j].mean_photons / e[j - 1].mean_photons == doctest::Approx(std::pow(0.05, 1.0 / 19.0)).epsilon(1e-12));
    CHECK(*e[j].attenuation_db > *e[j - 1].attenuation_db);
  }
  CHECK(e.index_of(7) == std::optional<std::size_t>(6));
  CHECK(!e.index_of(99));
}

#include <doctest.h>

#include <random>
#include <set>
#include <vector>

#include "smg/core.h"
#include "smg/gridworld.h"
#include "smg/market.h"
#include "smg/matrix_games.h"

using namespace smg;

TEST_CASE("discounted_return examples") {
  const std::vector<double> empty;
  CHECK(discounted_return(empty, DiscountFactor(0.9)) == 0.0);
  const std::vector<double> two{2.0, 5.0};
  CHECK(discounted_return(two, DiscountFactor(0.0)) == 2.0);
  const std::vector<double> ones{1.0, 1.0, 1.0};
  CHECK(discounted_return(ones, DiscountFactor(0.9)) == doctest::Approx(1.0 + 0.9 + 0.81));
}

TEST_CASE("discount factor domain") {
  CHECK_NOTHROW(DiscountFactor(0.0));
  CHECK_NOTHROW(DiscountFactor(0.999));
  CHECK_THROWS_AS(DiscountFactor(1.0), std::invalid_argument);
  CHECK_THROWS_AS(DiscountFactor(-0.1), std::invalid_argument);
}

TEST_CASE("discounted_return properties on random sequences") {
  Rng rng(7);
  std::uniform_real_distribution<double> r(-3.0, 3.0), g(0.0, 0.99);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<double> rewards(1 + trial % 40);
    for (double& x : rewards) x = r(rng);
    const DiscountFactor gamma(g(rng));

    CHECK(discounted_return(rewards, DiscountFactor(0.0)) == rewards.front());

    const double a = r(rng);
    std::vector<double> scaled = rewards;
    for (double& x : scaled) x *= a;
    CHECK(discounted_return(scaled, gamma) ==
          doctest::Approx(a * discounted_return(rewards, gamma)).epsilon(1e-12));

    CHECK(std::abs(discounted_return(rewards, gamma)) <=
          3.0 / (1.0 - gamma.value()) + 1e-12);
  }
}

TEST_CASE("normalize_return bounds and midpoint") {
  CHECK(normalize_return(-2.0, -2.0, 6.0) == 0.0);
  CHECK(normalize_return(6.0, -2.0, 6.0) == 1.0);
  CHECK(normalize_return(2.0, -2.0, 6.0) == 0.5);
  CHECK(normalize_return(100.0, 0.0, 1.0) == 1.0);
  CHECK(normalize_return(-100.0, 0.0, 1.0) == 0.0);
  CHECK_THROWS_AS(normalize_return(0.0, 1.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(normalize_return(0.0, 2.0, 1.0), std::invalid_argument);
}

TEST_CASE("normalize_return is monotone") {
  Rng rng(11);
  std::uniform_real_distribution<double> u(-10.0, 10.0);
  for (int k = 0; k < 1000; ++k) {
    double a = u(rng), b = u(rng);
    if (a > b) std::swap(a, b);
    CHECK(normalize_return(a, -3.0, 4.0) <= normalize_return(b, -3.0, 4.0));
  }
}

TEST_CASE("derived seeds are deterministic and distinct per stream") {
  std::set<std::uint64_t> seen;
  for (std::uint64_t s = 0; s < 64; ++s) {
    CHECK(derive_seed(42, s) == derive_seed(42, s));
    seen.insert(derive_seed(42, s));
  }
  CHECK(seen.size() == 64);
  CHECK(derive_seed(1, 3) != derive_seed(2, 3));
}

TEST_CASE("env_step contract: payoff cells, invalid actions, determinism") {
  MatrixGame pd(pd_matrix(), "pd");
  Rng rng(1);
  pd.reset(rng);
  const std::vector<int> cc{kCooperate, kCooperate};
  const auto out = pd.step(cc, rng);
  CHECK(out.rewards == RewardVector{3.0, 3.0});
  const std::vector<int> bad{0, 2};
  CHECK_THROWS_AS(pd.step(bad, rng), std::out_of_range);

  GridConfig grid;
  Smartfactory a(grid), b(grid);
  Rng ra(5), rb(5);
  a.reset(ra);
  b.reset(rb);
  Rng pick(9);
  std::uniform_int_distribution<int> act(0, 4);
  while (!a.done()) {
    std::vector<int> joint(grid.n_agents);
    for (int& x : joint) x = act(pick);
    const auto oa = a.step(joint, ra);
    const auto ob = b.step(joint, rb);
    CHECK(oa.rewards == ob.rewards);
    CHECK(a.render() == b.render());
  }
  const std::vector<int> stay(grid.n_agents, kStay);
  CHECK_THROWS_AS(a.step(stay, ra), std::logic_error);
}

#include <set>

#include <gtest/gtest.h>

#include "nonoverlap/analysis.hpp"
#include "nonoverlap/simulation.hpp"

using namespace nonoverlap;

namespace {

Dataset dgp_data(int n, double alpha, std::uint64_t seed) {
  DgpConfig cfg;
  cfg.n = n;
  cfg.overlap_alpha = alpha;
  auto rng = make_engine(seed, {});
  return sample_dgp(cfg, rng).data;
}

AnalysisConfig small_config() {
  AnalysisConfig cfg;
  cfg.thresholds = stats::log10_grid(-4.0, -1.0, 0.5);
  cfg.B = 500;
  return cfg;
}

}  // namespace

TEST(Analysis, EveryConfigurationReportedOnce) {
  const auto cfg = small_config();
  const auto doc = run_estimate(dgp_data(400, 5.0, 1), cfg);
  std::set<std::pair<double, double>> seen;
  for (const auto& c : doc["configurations"]) {
    EXPECT_TRUE(seen.insert({c["c"].get<double>(), c["gamma"].get<double>()}).second);
    EXPECT_LE(c["uniform_ci"]["lo"].get<double>(), c["L_hat"].get<double>());
    EXPECT_GE(c["uniform_ci"]["hi"].get<double>(), c["U_hat"].get<double>());
  }
  EXPECT_EQ(seen.size(), cfg.thresholds.size() * cfg.gammas.size());
  EXPECT_EQ(doc["plot"].size(), seen.size());
  const auto& u = doc["uniform"];
  EXPECT_GE(u["q_hat"].get<double>(), 0.0);
  EXPECT_EQ(u["reject_null"].get<bool>(),
            !(u["narrowest"]["lo"].get<double>() <= 0.0 && 0.0 <= u["narrowest"]["hi"].get<double>()));
  EXPECT_TRUE(doc["warnings"].is_array());
  // B = 500 is below the recommended minimum
  EXPECT_FALSE(doc["warnings"].empty());
}

TEST(Analysis, RepeatedRunsAreByteIdentical) {
  auto cfg = small_config();
  const auto data = dgp_data(300, 5.0, 2);
  const auto a = run_estimate(data, cfg).dump();
  cfg.threads = 3;
  const auto b = run_estimate(data, cfg).dump();
  EXPECT_EQ(a, b);
  std::ostringstream x, y;
  write_estimate_csv(x, run_estimate(data, cfg));
  write_estimate_csv(y, nlohmann::ordered_json::parse(a));
  EXPECT_EQ(x.str(), y.str());
}

TEST(Analysis, FullOverlapMatchesOneStepWidth) {
  const auto doc = run_estimate(dgp_data(2000, 0.0, 3), AnalysisConfig{});
  const auto& nw = doc["uniform"]["narrowest"];
  const double width = nw["hi"].get<double>() - nw["lo"].get<double>();
  const double dr = doc["onestep"]["width"].get<double>();
  EXPECT_NEAR(width / dr, 1.0, 0.2);
  EXPECT_TRUE(doc["warnings"].empty()) << doc["warnings"].dump();
}

TEST(Analysis, InvalidConfigRejected) {
  auto cfg = small_config();
  cfg.thresholds = {0.7};
  EXPECT_THROW(run_estimate(dgp_data(100, 0.0, 4), cfg), ParameterError);
  cfg = small_config();
  cfg.gammas = {};
  EXPECT_THROW(run_estimate(dgp_data(100, 0.0, 4), cfg), ParameterError);
}

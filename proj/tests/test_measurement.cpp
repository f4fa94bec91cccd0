#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <vector>

#include "probemap/measurement.hpp"
#include "probemap/rng.hpp"
#include "support/synthetic.hpp"

using namespace probemap;

namespace {

measure::IVRecord linear_record(double g_light, double g_dark, int points = 40) {
  measure::IVRecord rec;
  for (int i = 0; i < points; ++i) {
    const double v = -40.0 + 80.0 * static_cast<double>(i) / (points - 1);
    rec.voltages.push_back(v);
    rec.current_light.push_back(g_light * v);
    rec.current_dark.push_back(g_dark * v);
  }
  return rec;
}

}  // namespace

TEST_CASE("photoconductance: exact linear sweep") {
  const auto rec = linear_record(2.0, 1.0);
  const auto fit = measure::photoconductance(rec);
  CHECK(fit.g_ph == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(fit.r2 - 1.0) < 1e-12);
}

TEST_CASE("photoconductance: dark equals light") {
  const auto rec = linear_record(1.5, 1.5);
  const auto fit = measure::photoconductance(rec);
  CHECK(fit.g_ph == doctest::Approx(0.0));
}

TEST_CASE("photoconductance: offset invariance and linear scaling") {
  auto rec = linear_record(2e-9, 0.5e-9);
  const double base = measure::photoconductance(rec).g_ph;

  // A common offset current on both sweeps cancels in the difference.
  auto offset = rec;
  for (size_t i = 0; i < offset.voltages.size(); ++i) {
    offset.current_light[i] += 3.3e-8;
    offset.current_dark[i] += 3.3e-8;
  }
  CHECK(std::abs(measure::photoconductance(offset).g_ph - base) < 1e-12 * std::abs(base) + 1e-24);

  // Scaling the photocurrent scales the slope.
  auto scaled = rec;
  for (size_t i = 0; i < scaled.voltages.size(); ++i) {
    scaled.current_light[i] = scaled.current_dark[i] +
                              5.0 * (rec.current_light[i] - rec.current_dark[i]);
  }
  CHECK(std::abs(measure::photoconductance(scaled).g_ph - 5.0 * base) <
        1e-12 * std::abs(5.0 * base));
}

TEST_CASE("photoconductance: zero-intercept option") {
  auto rec = linear_record(2.0, 1.0);
  // Shift the photocurrent by a constant: free intercept absorbs it, the
  // zero-intercept fit cannot.
  for (auto& i : rec.current_light) i += 4.0;
  CHECK(measure::photoconductance(rec, false).g_ph == doctest::Approx(1.0));
  CHECK(measure::photoconductance(rec, true).g_ph == doctest::Approx(1.0));  // symmetric V grid
  CHECK(measure::photoconductance(rec, false).r2 == doctest::Approx(1.0));
}

TEST_CASE("photoconductance input validation") {
  measure::IVRecord bad;
  bad.voltages = {1.0};
  bad.current_light = {1.0};
  bad.current_dark = {0.0};
  CHECK_THROWS_AS(measure::photoconductance(bad), std::invalid_argument);

  measure::IVRecord non_monotonic;
  non_monotonic.voltages = {0.0, 1.0, 1.0};
  non_monotonic.current_light = {0.0, 1.0, 2.0};
  non_monotonic.current_dark = {0.0, 0.0, 0.0};
  CHECK_THROWS_AS(measure::photoconductance(non_monotonic), std::invalid_argument);

  measure::IVRecord ragged;
  ragged.voltages = {0.0, 1.0};
  ragged.current_light = {0.0};
  ragged.current_dark = {0.0, 0.0};
  CHECK_THROWS_AS(measure::photoconductance(ragged), std::invalid_argument);
}

TEST_CASE("photoconductance recovers a noisy synthetic slope") {
  // noise sigma = 1% of the photocurrent range; per-seed slope error is then
  // ~0.5% (1 sigma), so the estimator accuracy is asserted on the median.
  const double truth = 3.7e-9;
  std::vector<double> recovered;
  int within_1pct = 0;
  for (uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(mix_seed(4242, seed));
    measure::IVRecord rec;
    const double range = truth * 80.0;
    for (int i = 0; i < 40; ++i) {
      const double v = -40.0 + 80.0 * static_cast<double>(i) / 39.0;
      rec.voltages.push_back(v);
      rec.current_dark.push_back(0.3e-9 * v);
      rec.current_light.push_back(0.3e-9 * v + truth * v + 0.01 * range * rng.normal());
    }
    const double g = measure::photoconductance(rec).g_ph;
    recovered.push_back(g);
    if (std::abs(g - truth) / truth < 0.01) ++within_1pct;
  }
  CHECK(std::abs(testsupport::median(recovered) - truth) / truth < 0.01);
  CHECK(within_1pct >= 85);  // ~93% expected at 1.85 sigma
}

TEST_CASE("synth_iv: dead region, monotone model, documented ground truth") {
  const auto dead = measure::synth_iv(0.5, 0.0, 7);
  for (size_t i = 0; i < dead.voltages.size(); ++i) {
    CHECK(dead.current_light[i] == dead.current_dark[i]);
  }
  CHECK(measure::photoconductance(dead).g_ph == doctest::Approx(0.0));

  measure::SynthOptions noiseless;
  noiseless.noise_frac = 0.0;
  const auto lo = measure::synth_iv(0.0, 1.0, 1, noiseless);
  const auto hi = measure::synth_iv(1.0, 1.0, 1, noiseless);
  CHECK(measure::photoconductance(hi).g_ph > measure::photoconductance(lo).g_ph);
  CHECK(measure::photoconductance(lo).g_ph == doctest::Approx(measure::synth_true_gph(0.0, 1.0)));
  CHECK(measure::photoconductance(hi).g_ph == doctest::Approx(measure::synth_true_gph(1.0, 1.0)));

  CHECK_THROWS_AS(measure::synth_iv(-0.1, 1.0, 1), std::invalid_argument);
  CHECK_THROWS_AS(measure::synth_iv(0.5, 1.5, 1), std::invalid_argument);
}

TEST_CASE("synth_iv round trip: recovered medians increase with composition") {
  std::vector<double> medians;
  for (int c = 0; c < 35; ++c) {
    const double x = static_cast<double>(c) / 34.0;
    std::vector<double> gs;
    for (uint64_t rep = 0; rep < 7; ++rep) {
      const auto rec = measure::synth_iv(x, 1.0, mix_seed(77, 100 * c + rep));
      gs.push_back(measure::photoconductance(rec).g_ph);
    }
    medians.push_back(testsupport::median(gs));
  }
  for (size_t i = 1; i < medians.size(); ++i) {
    CHECK(medians[i] > medians[i - 1]);
  }
}

TEST_CASE("spatial_map: single sample gives a constant map inside the mask") {
  const auto mask = testsupport::make_disk_mask(32, 16.0, 16.0, 10.0);
  field::Pose pose;
  pose.x = 16.0;
  pose.y = 16.0;
  std::vector<std::pair<field::Pose, double>> samples = {{pose, 4.2e-9}};
  const auto map = measure::spatial_map(samples, mask, 5.0);
  for (int y = 0; y < 32; ++y) {
    for (int x = 0; x < 32; ++x) {
      const double v = map.grid[static_cast<size_t>(y) * 32 + x];
      if (mask.at(x, y)) {
        CHECK(v == doctest::Approx(4.2e-9));
      } else {
        CHECK(std::isnan(v));
      }
    }
  }
}

TEST_CASE("spatial_map: tiny bandwidth recovers each sample at its location") {
  const auto mask = testsupport::make_disk_mask(48, 24.0, 24.0, 16.0);
  field::Pose a, b;
  a.x = 18.0;
  a.y = 24.0;
  b.x = 30.0;
  b.y = 24.0;
  std::vector<std::pair<field::Pose, double>> samples = {{a, 1.0e-9}, {b, 9.0e-9}};
  const auto map = measure::spatial_map(samples, mask, 0.05);
  CHECK(map.grid[24 * 48 + 18] == doctest::Approx(1.0e-9));
  CHECK(map.grid[24 * 48 + 30] == doctest::Approx(9.0e-9));
}

TEST_CASE("spatial_map matches the direct weighted-sum oracle and stays bounded") {
  const auto mask = testsupport::make_disk_mask(40, 20.0, 20.0, 14.0);
  std::vector<std::pair<field::Pose, double>> samples;
  const double gs[] = {2.0e-9, 5.5e-9, 3.1e-9};
  const double xs[] = {14.0, 26.0, 20.0};
  const double ys[] = {20.0, 16.0, 27.0};
  for (int i = 0; i < 3; ++i) {
    field::Pose p;
    p.x = xs[i];
    p.y = ys[i];
    samples.push_back({p, gs[i]});
  }
  const double bw = 6.0;
  const auto map = measure::spatial_map(samples, mask, bw);

  Rng rng(31);
  int checked = 0;
  while (checked < 10) {
    const int x = rng.uniform_int(40), y = rng.uniform_int(40);
    if (!mask.at(x, y)) continue;
    double num = 0.0, den = 0.0;
    for (int i = 0; i < 3; ++i) {
      const double d2 = (x - xs[i]) * (x - xs[i]) + (y - ys[i]) * (y - ys[i]);
      const double w = std::exp(-d2 / (2.0 * bw * bw));
      num += w * gs[i];
      den += w;
    }
    CHECK(std::abs(map.grid[static_cast<size_t>(y) * 40 + x] - num / den) < 1e-9 * 5.5e-9 + 1e-20);
    ++checked;
  }

  for (int y = 0; y < 40; ++y) {
    for (int x = 0; x < 40; ++x) {
      const double v = map.grid[static_cast<size_t>(y) * 40 + x];
      if (!std::isnan(v)) {
        CHECK(v >= 2.0e-9 - 1e-20);
        CHECK(v <= 5.5e-9 + 1e-20);
      }
    }
  }

  CHECK_THROWS_AS(measure::spatial_map({}, mask, 5.0), std::invalid_argument);
  CHECK_THROWS_AS(measure::spatial_map(samples, mask, 0.0), std::invalid_argument);
}

TEST_CASE("campaign_summary: medians, spread, and the composition trend") {
  std::vector<measure::MeasurementRecord> one = {{"s0", {}, 3.0e-9, 0.99, 0.5}};
  auto stats = measure::campaign_summary(one);
  REQUIRE(stats.size() == 1);
  CHECK(stats[0].median == doctest::Approx(3.0e-9));
  CHECK(stats[0].count == 1);

  std::vector<measure::MeasurementRecord> two = {{"s0", {}, 2.0e-9, 0.99, 0.5},
                                                 {"s0", {}, 4.0e-9, 0.99, 0.5}};
  stats = measure::campaign_summary(two);
  REQUIRE(stats.size() == 1);
  CHECK(stats[0].median == doctest::Approx(3.0e-9));

  // 35-composition synthetic campaign: Spearman(composition, median) > 0.9.
  std::vector<measure::MeasurementRecord> campaign;
  for (int c = 0; c < 35; ++c) {
    const double x = static_cast<double>(c) / 34.0;
    for (uint64_t rep = 0; rep < 5; ++rep) {
      const auto rec = measure::synth_iv(x, 1.0, mix_seed(9, 100 * c + rep));
      campaign.push_back({"s" + std::to_string(c), {}, measure::photoconductance(rec).g_ph,
                          1.0, x});
    }
  }
  stats = measure::campaign_summary(campaign);
  REQUIRE(stats.size() == 35);
  std::vector<double> xs, meds;
  for (const auto& s : stats) {
    xs.push_back(s.composition_x);
    meds.push_back(s.median);
    CHECK(s.count == 5);
  }
  CHECK(testsupport::spearman(xs, meds) > 0.9);
}

TEST_CASE("iv csv round trip") {
  const auto dir = std::filesystem::temp_directory_path() / "probemap_measure_tests";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "sweep.csv").string();
  const auto rec = measure::synth_iv(0.4, 0.9, 5);
  measure::write_iv_csv(path, rec);
  const auto back = measure::read_iv_csv(path);
  REQUIRE(back.voltages.size() == rec.voltages.size());
  for (size_t i = 0; i < rec.voltages.size(); ++i) {
    CHECK(back.voltages[i] == doctest::Approx(rec.voltages[i]).epsilon(1e-12));
    CHECK(back.current_light[i] == doctest::Approx(rec.current_light[i]).epsilon(1e-9));
  }
  CHECK_THROWS_AS(measure::read_iv_csv((dir / "none.csv").string()), std::runtime_error);
}

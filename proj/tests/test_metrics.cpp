#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "pcreg/metrics.hpp"
#include "support/oracles.hpp"

using namespace pcreg;

namespace {

PointCloud cloud_of(const std::vector<Eigen::Vector3d>& pts) {
    PointCloud c;
    c.positions = pts;
    return c;
}

Eigen::Vector3d random_axis(CounterRng& rng) {
    Eigen::Vector3d a(rng.normal(), rng.normal(), rng.normal());
    return a.normalized();
}

/// Entry whose first `inliers` correspondences sit exactly on their partner
/// and the rest are displaced far beyond tau1, under an identity motion.
FmrEntry boundary_entry(int total, int inliers, const std::string& group = "g") {
    FmrEntry e;
    e.group = group;
    for (int i = 0; i < total; ++i) {
        const Eigen::Vector3d base(0.1 * i, 0.05 * i, 0.0);
        e.p1.positions.push_back(base);
        e.p0.positions.push_back(i < inliers ? base : base + Eigen::Vector3d(0.5, 0.0, 0.0));
        e.corr.items.push_back({i, i, 1.0, 0, -1});
    }
    return e;
}

/// Scalar-loop recomputation of recall and group spread, structured around a
/// per-pair flag list rather than the library's accumulators.
std::pair<double, double> recall_oracle(const std::vector<FmrEntry>& entries,
                                        const FmrConfig& cfg) {
    std::vector<bool> flags;
    for (const auto& e : entries) {
        if (e.corr.empty()) {
            flags.push_back(false);
            continue;
        }
        double frac = 0.0;
        for (const auto& corr : e.corr.items) {
            const Eigen::Vector3d moved =
                e.gt.rotation * e.p1.positions[static_cast<std::size_t>(corr.q)] +
                e.gt.translation;
            const Eigen::Vector3d diff =
                e.p0.positions[static_cast<std::size_t>(corr.p)] - moved;
            const double dist =
                std::sqrt(diff.x() * diff.x() + diff.y() * diff.y() + diff.z() * diff.z());
            if (dist < cfg.tau1) frac += 1.0;
        }
        frac /= static_cast<double>(e.corr.items.size());
        flags.push_back(frac > cfg.tau2);
    }
    double recall = 0.0;
    for (bool f : flags) recall += f ? 1.0 : 0.0;
    recall /= static_cast<double>(flags.size());

    std::map<std::string, std::pair<int, int>> groups;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        groups[entries[i].group].first += flags[i] ? 1 : 0;
        groups[entries[i].group].second += 1;
    }
    std::vector<double> rs;
    for (const auto& [name, c] : groups)
        rs.push_back(static_cast<double>(c.first) / static_cast<double>(c.second));
    double mean = 0.0;
    for (double r : rs) mean += r;
    mean /= static_cast<double>(rs.size());
    double var = 0.0;
    for (double r : rs) var += (r - mean) * (r - mean);
    return {recall, std::sqrt(var / static_cast<double>(rs.size()))};
}

std::vector<FmrEntry> random_entries(std::uint64_t seed, int n) {
    CounterRng rng(seed);
    std::vector<FmrEntry> entries;
    const std::vector<std::string> families{"alpha", "beta", "gamma"};
    for (int i = 0; i < n; ++i) {
        FmrEntry e;
        e.group = families[rng.index(families.size())];
        e.gt.rotation = uniform_random_rotation(rng);
        e.gt.translation = Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal()) * 0.1;
        const int m = 5 + static_cast<int>(rng.index(20));
        for (int j = 0; j < m; ++j) {
            const Eigen::Vector3d q(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
            Eigen::Vector3d p = e.gt.apply(q);
            if (rng.uniform() < 0.5)
                p += Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal()) *
                     rng.uniform(0.0, 0.4);
            e.p1.positions.push_back(q);
            e.p0.positions.push_back(p);
            e.corr.items.push_back({j, j, 1.0, 0, -1});
        }
        entries.push_back(std::move(e));
    }
    return entries;
}

}  // namespace

TEST_CASE("rotation error is zero at equality and 180 at a half turn") {
    const Eigen::Matrix3d id = Eigen::Matrix3d::Identity();
    REQUIRE(rotation_error(id, id) == 0.0);

    const Eigen::Matrix3d half =
        axis_angle_rotation(Eigen::Vector3d::UnitZ(), std::numbers::pi);
    REQUIRE(rotation_error(half, id) == Catch::Approx(180.0).margin(1e-9));
}

TEST_CASE("rotation error recovers constructed axis-angle magnitudes") {
    CounterRng rng(601);
    for (int trial = 0; trial < 50; ++trial) {
        const double theta = rng.uniform(0.01, std::numbers::pi - 0.01);
        const Eigen::Matrix3d r = axis_angle_rotation(random_axis(rng), theta);
        const double expect = theta * 180.0 / std::numbers::pi;
        REQUIRE(rotation_error(r, Eigen::Matrix3d::Identity()) ==
                Catch::Approx(expect).margin(1e-9));
    }
}

TEST_CASE("rotation error is symmetric and left-invariant") {
    CounterRng rng(602);
    for (int trial = 0; trial < 20; ++trial) {
        const Eigen::Matrix3d a = uniform_random_rotation(rng);
        const Eigen::Matrix3d b = uniform_random_rotation(rng);
        const Eigen::Matrix3d q = uniform_random_rotation(rng);
        REQUIRE(rotation_error(a, b) == rotation_error(b, a));
        REQUIRE(rotation_error(q * a, q * b) ==
                Catch::Approx(rotation_error(a, b)).margin(1e-9));
    }
}

TEST_CASE("rotation error rejects non-rotations") {
    const Eigen::Matrix3d id = Eigen::Matrix3d::Identity();
    Eigen::Matrix3d scaled = 2.0 * id;
    REQUIRE_THROWS_AS(rotation_error(scaled, id), std::invalid_argument);
    Eigen::Matrix3d reflect = id;
    reflect(2, 2) = -1.0;
    REQUIRE_THROWS_AS(rotation_error(id, reflect), std::invalid_argument);
}

TEST_CASE("translation error reports centimeters") {
    const Eigen::Vector3d z = Eigen::Vector3d::Zero();
    REQUIRE(translation_error(z, z) == 0.0);
    REQUIRE(translation_error(z, Eigen::Vector3d(0.03, 0.04, 0.0)) ==
            Catch::Approx(5.0).margin(1e-12));

    CounterRng rng(603);
    for (int trial = 0; trial < 30; ++trial) {
        const Eigen::Vector3d a(rng.normal(), rng.normal(), rng.normal());
        const Eigen::Vector3d b(rng.normal(), rng.normal(), rng.normal());
        const double dx = a.x() - b.x(), dy = a.y() - b.y(), dz = a.z() - b.z();
        const double naive = std::sqrt(dx * dx + dy * dy + dz * dz) * 100.0;
        REQUIRE(translation_error(a, b) == Catch::Approx(naive).margin(1e-12));
    }
}

TEST_CASE("pair metrics validation bounds the error ranges") {
    PairMetrics m;
    REQUIRE_NOTHROW(m.validate());
    m.rotation_deg = -1.0;
    REQUIRE_THROWS_AS(m.validate(), std::invalid_argument);
    m.rotation_deg = 181.0;
    REQUIRE_THROWS_AS(m.validate(), std::invalid_argument);
    m.rotation_deg = 10.0;
    m.chamfer_cm = -0.5;
    REQUIRE_THROWS_AS(m.validate(), std::invalid_argument);
}

TEST_CASE("pair metrics of a perfect prediction vanish") {
    CounterRng rng(604);
    PointCloud p0 = cloud_of(oracle::random_points(rng, 40, -1.0, 1.0));
    RigidTransform gt;
    gt.rotation = uniform_random_rotation(rng);
    gt.translation = Eigen::Vector3d(0.2, -0.1, 0.3);
    const PointCloud p1 = apply_transform(gt, p0);

    const PairMetrics m = pair_metrics(gt, gt, p0, p1);
    // acos(1 - eps) floors near 1.4e-6 degrees; fine at whole-degree thresholds
    REQUIRE(m.rotation_deg < 1e-5);
    REQUIRE(m.translation_cm == 0.0);
    REQUIRE(m.chamfer_cm < 1e-9);
    REQUIRE(m.rotation_within(5.0));
    REQUIRE(m.translation_within(5.0));
    REQUIRE(m.chamfer_within(1.0));
}

TEST_CASE("inlier fraction sits on a strict boundary at tau2") {
    // 1 of 20 inliers is exactly 5%, not above it; 2 of 20 is 10%.
    const FmrEntry one = boundary_entry(20, 1);
    const FmrEntry two = boundary_entry(20, 2);
    const FmrConfig cfg;
    REQUIRE_FALSE(feature_match(one.corr, one.p0, one.p1, one.gt, cfg));
    REQUIRE(feature_match(two.corr, two.p0, two.p1, two.gt, cfg));
}

TEST_CASE("recall is perfect when every correspondence is exact") {
    std::vector<FmrEntry> entries;
    for (int i = 0; i < 5; ++i) entries.push_back(boundary_entry(12, 12, "s" + std::to_string(i % 2)));
    const FmrResult r = feature_match_recall(entries);
    REQUIRE(r.recall == 1.0);
    REQUIRE(r.group_std == 0.0);
    REQUIRE(r.diagnostics.empty());
}

TEST_CASE("a pair without correspondences counts unmatched with a diagnostic") {
    std::vector<FmrEntry> entries;
    entries.push_back(boundary_entry(10, 10));
    FmrEntry empty;
    empty.group = "g";
    empty.p0.positions.emplace_back(0, 0, 0);
    empty.p1.positions.emplace_back(0, 0, 0);
    entries.push_back(empty);

    const FmrResult r = feature_match_recall(entries);
    REQUIRE(r.recall == 0.5);
    REQUIRE(r.matched[0] == 1);
    REQUIRE(r.matched[1] == 0);
    REQUIRE(r.diagnostics.size() == 1);
    REQUIRE(r.diagnostics[0].find("pair 1") != std::string::npos);

    REQUIRE_THROWS_AS(feature_match(empty.corr, empty.p0, empty.p1, empty.gt, FmrConfig{}),
                      std::invalid_argument);
    REQUIRE_THROWS_AS(feature_match_recall({}), std::invalid_argument);
}

TEST_CASE("recall equals a scalar recomputation oracle") {
    for (std::uint64_t seed : {11u, 12u, 13u}) {
        const std::vector<FmrEntry> entries = random_entries(seed, 40);
        const FmrConfig cfg;
        const FmrResult r = feature_match_recall(entries, cfg);
        const auto [recall, spread] = recall_oracle(entries, cfg);
        REQUIRE(r.recall == recall);
        REQUIRE(r.group_std == Catch::Approx(spread).margin(1e-15));
    }
}

TEST_CASE("recall moves monotonically with its thresholds") {
    const std::vector<FmrEntry> entries = random_entries(21, 30);
    double prev = 1.0;
    for (double tau2 : {0.05, 0.1, 0.2, 0.4, 0.6, 0.8}) {
        FmrConfig cfg;
        cfg.tau2 = tau2;
        const double r = feature_match_recall(entries, cfg).recall;
        REQUIRE(r <= prev);
        prev = r;
    }
    prev = 0.0;
    for (double tau1 : {0.01, 0.05, 0.1, 0.2, 0.5, 1.0}) {
        FmrConfig cfg;
        cfg.tau1 = tau1;
        const double r = feature_match_recall(entries, cfg).recall;
        REQUIRE(r >= prev);
        prev = r;
    }
}

TEST_CASE("threshold configs outside their domains are rejected") {
    FmrConfig bad;
    bad.tau1 = 0.0;
    REQUIRE_THROWS_AS(bad.validate(), std::invalid_argument);
    bad.tau1 = 0.1;
    bad.tau2 = 1.0;
    REQUIRE_THROWS_AS(bad.validate(), std::invalid_argument);
    bad.tau2 = 0.0;
    REQUIRE_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("summary of a perfect pair scores every accuracy") {
    const Report r = summarize({PairMetrics{}});
    for (const auto& m : r.metrics) {
        REQUIRE(m.mean == 0.0);
        REQUIRE(m.median == 0.0);
        for (const auto& [t, frac] : m.accuracies) REQUIRE(frac == 1.0);
    }
}

TEST_CASE("summary arithmetic on a two-pair example") {
    PairMetrics a, b;
    a.rotation_deg = 4.0;
    b.rotation_deg = 20.0;
    const Report r = summarize({a, b});
    const MetricSummary& rot = r.metrics[0];
    REQUIRE(rot.metric == "rotation_deg");
    REQUIRE(rot.median == 12.0);
    REQUIRE(rot.mean == 12.0);
    REQUIRE(rot.accuracies[0].second == 0.5);  // <5
    REQUIRE(rot.accuracies[1].second == 0.5);  // <10
    REQUIRE(rot.accuracies[2].second == 1.0);  // <45
}

TEST_CASE("summary matches an independent aggregation oracle") {
    CounterRng rng(605);
    std::vector<PairMetrics> all;
    for (int i = 0; i < 37; ++i) {
        PairMetrics m;
        m.rotation_deg = rng.uniform(0.0, 90.0);
        m.translation_cm = rng.uniform(0.0, 40.0);
        m.chamfer_cm = rng.uniform(0.0, 12.0);
        all.push_back(m);
    }
    const Report r = summarize(all);

    const auto check = [&](const MetricSummary& s, auto pick,
                           const std::vector<double>& thresholds) {
        std::vector<double> vals;
        for (const auto& m : all) vals.push_back(pick(m));
        double mean = 0.0;
        for (double v : vals) mean += v;
        mean /= static_cast<double>(vals.size());
        REQUIRE(s.mean == Catch::Approx(mean).margin(1e-12));

        std::vector<double> sorted = vals;
        std::sort(sorted.begin(), sorted.end());
        const std::size_t n = sorted.size();
        const double median =
            n % 2 == 1 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
        REQUIRE(s.median == median);

        for (std::size_t t = 0; t < thresholds.size(); ++t) {
            int hits = 0;
            for (double v : vals) hits += v < thresholds[t];
            REQUIRE(s.accuracies[t].first == thresholds[t]);
            REQUIRE(s.accuracies[t].second ==
                    static_cast<double>(hits) / static_cast<double>(vals.size()));
        }
    };
    check(r.metrics[0], [](const PairMetrics& m) { return m.rotation_deg; }, {5, 10, 45});
    check(r.metrics[1], [](const PairMetrics& m) { return m.translation_cm; }, {5, 10, 25});
    check(r.metrics[2], [](const PairMetrics& m) { return m.chamfer_cm; }, {1, 5, 10});
}

TEST_CASE("accuracy never decreases as its threshold grows") {
    CounterRng rng(606);
    std::vector<PairMetrics> all;
    for (int i = 0; i < 25; ++i) {
        PairMetrics m;
        m.rotation_deg = rng.uniform(0.0, 120.0);
        all.push_back(m);
    }
    const Report r =
        summarize(all, {1, 2, 5, 10, 20, 40, 80, 160}, {5, 10, 25}, {1, 5, 10});
    double prev = 0.0;
    for (const auto& [t, frac] : r.metrics[0].accuracies) {
        REQUIRE(frac >= prev);
        prev = frac;
    }
}

TEST_CASE("report serialization carries the schema and the table the labels") {
    PairMetrics a;
    a.rotation_deg = 3.0;
    a.translation_cm = 2.0;
    a.chamfer_cm = 0.5;
    const Report r = summarize({a});

    const nlohmann::json j = to_json(r);
    REQUIRE(j.contains("metrics"));
    REQUIRE(j["metrics"].size() == 3);
    REQUIRE(j["metrics"][0]["metric"] == "rotation_deg");
    REQUIRE(j["metrics"][0]["mean"] == 3.0);
    REQUIRE(j["metrics"][0]["median"] == 3.0);
    REQUIRE(j["metrics"][0]["accuracies"]["5"] == 1.0);
    REQUIRE(j["metrics"][1]["accuracies"]["25"] == 1.0);
    REQUIRE(j["metrics"][2]["accuracies"]["1"] == 1.0);

    const std::string table = format_table(r);
    REQUIRE(table.find("rotation_deg") != std::string::npos);
    REQUIRE(table.find("translation_cm") != std::string::npos);
    REQUIRE(table.find("chamfer_cm") != std::string::npos);
    REQUIRE(table.find("100.0%") != std::string::npos);
}

TEST_CASE("summarize rejects an empty suite") {
    REQUIRE_THROWS_AS(summarize({}), std::invalid_argument);
}

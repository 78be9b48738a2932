#include <doctest.h>

#include <cmath>

#include "aegis/soc.hpp"

using namespace aegis;

namespace {

RawAlert alert(const std::string& id, const std::string& identity, AlertType type, SimTime at,
               double severity = 0.5, double confidence = 0.6, const std::string& asset = "wks-1") {
    RawAlert a;
    a.alert_id = id;
    a.identity_id = identity;
    a.alert_type = type;
    a.source = AlertSource::siem;
    a.asset_id = asset;
    a.severity = severity;
    a.confidence = confidence;
    a.observed_at = at;
    return a;
}

AssetInventory soc_assets() {
    AssetInventory inv;
    inv.put({"wks-1", "Workstation", 0.2, false, {}});
    inv.put({"srv-db-01", "DB cluster", 0.95, true, {"SystemOwner.ServiceX"}});
    inv.put({"srv-api-7", "API server", 0.6, false, {}});
    return inv;
}

// Independent O(n^2) grouping: scan forward from each unassigned alert.
std::vector<std::vector<RawAlert>> oracle_groups(std::vector<RawAlert> alerts, SimTime window_ms) {
    std::map<std::string, std::vector<RawAlert>> by_identity;
    for (const auto& a : alerts) by_identity[a.identity_id].push_back(a);
    std::vector<std::vector<RawAlert>> groups;
    for (auto& [id, list] : by_identity) {
        std::stable_sort(list.begin(), list.end(), [](const RawAlert& a, const RawAlert& b) {
            if (a.observed_at != b.observed_at) return a.observed_at < b.observed_at;
            return a.alert_id < b.alert_id;
        });
        std::size_t i = 0;
        while (i < list.size()) {
            std::vector<RawAlert> group;
            SimTime start = list[i].observed_at;
            while (i < list.size() && list[i].observed_at - start <= window_ms)
                group.push_back(list[i++]);
            groups.push_back(std::move(group));
        }
    }
    return groups;
}

}  // namespace

TEST_CASE("risk_score is the declared weighted sum") {
    CHECK(risk_score({0.8, 0.0, 0.0}, {1, 0, 0}) == doctest::Approx(0.8));
    CHECK(risk_score({0.8, 0.9, 1.0}, {0.5, 0.3, 0.2}) == doctest::Approx(0.87));

    RngStream rng(2, "risk");
    for (int i = 0; i < 1000; ++i) {
        RiskInputs x{rng.next_real(), rng.next_real(), rng.next_real()};
        RiskWeights w{rng.next_real() * 2, rng.next_real() * 2, rng.next_real() * 2};
        double expect = w.w1 * x.severity + w.w2 * x.confidence + w.w3 * x.asset_criticality;
        double got = risk_score(x, w);
        CHECK(std::abs(got - expect) <= 1e-12 * std::max(1.0, std::abs(expect)));
    }
}

TEST_CASE("scaling the weights by c > 0 preserves ranking and thresholded sets") {
    RngStream rng(4, "scale");
    RiskWeights w{0.4, 0.3, 0.3};
    std::vector<RiskInputs> inputs;
    for (int i = 0; i < 50; ++i)
        inputs.push_back({rng.next_real(), rng.next_real(), rng.next_real()});
    for (double c : {0.25, 2.0, 17.5}) {
        RiskWeights scaled{w.w1 * c, w.w2 * c, w.w3 * c};
        double threshold = 0.6;
        std::vector<std::size_t> rank_a(inputs.size()), rank_b(inputs.size());
        for (std::size_t i = 0; i < inputs.size(); ++i) rank_a[i] = rank_b[i] = i;
        auto by = [&](const RiskWeights& weights) {
            return [&inputs, weights](std::size_t a, std::size_t b) {
                return risk_score(inputs[a], weights) > risk_score(inputs[b], weights);
            };
        };
        std::stable_sort(rank_a.begin(), rank_a.end(), by(w));
        std::stable_sort(rank_b.begin(), rank_b.end(), by(scaled));
        CHECK(rank_a == rank_b);
        for (std::size_t i = 0; i < inputs.size(); ++i) {
            bool above = risk_score(inputs[i], w) > threshold;
            bool above_scaled = risk_score(inputs[i], scaled) > threshold * c;
            CHECK(above == above_scaled);
        }
    }
}

TEST_CASE("a burst of login failures plus a geo anomaly forms one cluster") {
    IdSource ids(1);
    AssetInventory assets = soc_assets();
    std::vector<RawAlert> alerts;
    for (int i = 0; i < 6; ++i)
        alerts.push_back(alert("a" + std::to_string(i), "emp-9", AlertType::login_failure,
                               1000 + i * 30'000, 0.5, 0.8));
    alerts.push_back(alert("a-geo", "emp-9", AlertType::geo_anomaly, 1000 + 6 * 30'000, 0.7, 0.9));

    auto clusters = cluster_alerts(alerts, 5 * 60 * 1000, 5, {0.4, 0.3, 0.3}, assets, ids);
    REQUIRE(clusters.size() == 1);
    const auto& c = clusters[0];
    CHECK(c.alert_ids.size() == 7);
    CHECK(c.identity_id == "emp-9");
    auto types = c.features["alert_types"].get<std::vector<std::string>>();
    CHECK(types == std::vector<std::string>{"geo_anomaly", "login_failure"});
    CHECK(c.features["max_severity"].get<double>() == doctest::Approx(0.7));
    CHECK(c.window_start == 1000);
    CHECK(c.window_end == 1000 + 6 * 30'000);

    CHECK(cluster_alerts({}, 300'000, 5, {0.4, 0.3, 0.3}, assets, ids).empty());
}

TEST_CASE("two distinct alert types qualify a small group; singletons do not") {
    IdSource ids(2);
    AssetInventory assets = soc_assets();
    std::vector<RawAlert> alerts = {
        alert("x1", "u1", AlertType::login_failure, 100),
        alert("x2", "u1", AlertType::token_misuse, 200),
        alert("x3", "u2", AlertType::login_failure, 100),
    };
    auto clusters = cluster_alerts(alerts, 60'000, 5, {0.4, 0.3, 0.3}, assets, ids);
    REQUIRE(clusters.size() == 1);
    CHECK(clusters[0].identity_id == "u1");
}

TEST_CASE("clustering equals the brute-force windowing oracle on random streams") {
    RngStream rng(15, "cluster");
    AssetInventory assets = soc_assets();
    for (int trial = 0; trial < 25; ++trial) {
        IdSource ids(trial);
        std::vector<RawAlert> alerts;
        int n = static_cast<int>(rng.next_below(200));
        for (int i = 0; i < n; ++i) {
            alerts.push_back(alert("r" + std::to_string(i),
                                   "u" + std::to_string(rng.next_below(5)),
                                   static_cast<AlertType>(rng.next_below(5)),
                                   static_cast<SimTime>(rng.next_below(3'600'000)),
                                   rng.next_real(), rng.next_real()));
        }
        SimTime window = 5 * 60 * 1000;
        std::size_t threshold = 4;

        auto clusters = cluster_alerts(alerts, window, threshold, {0.4, 0.3, 0.3}, assets, ids);

        // Oracle: group independently, qualify, compare alert-id sets.
        std::set<std::vector<std::string>> expected;
        for (auto& group : oracle_groups(alerts, window)) {
            std::set<AlertType> types;
            for (const auto& a : group) types.insert(a.alert_type);
            if (group.size() >= threshold || types.size() >= 2) {
                std::vector<std::string> ids_sorted;
                for (const auto& a : group) ids_sorted.push_back(a.alert_id);
                std::sort(ids_sorted.begin(), ids_sorted.end());
                expected.insert(ids_sorted);
            }
        }
        std::set<std::vector<std::string>> got;
        for (const auto& c : clusters) {
            std::vector<std::string> ids_sorted = c.alert_ids;
            std::sort(ids_sorted.begin(), ids_sorted.end());
            got.insert(ids_sorted);
        }
        CHECK(got == expected);
    }
}

TEST_CASE("triage opens incidents strictly above the threshold") {
    IdSource ids(5);
    AssetInventory assets = soc_assets();
    AlertCluster cluster;
    cluster.cluster_id = "cluster-1";
    cluster.identity_id = "u1";
    cluster.alert_ids = {"a1"};
    cluster.features = json{{"top_asset", "srv-db-01"}};

    TriageConfig config;
    config.incident_threshold = 0.6;

    cluster.score = 0.87;
    auto opened = triage(cluster, config, assets, ids, 1000);
    REQUIRE(opened.has_value());
    CHECK(opened->band == SeverityBand::high);
    CHECK(opened->crown_jewel_involved);
    CHECK(opened->incident_payload["severity_band"] == "high");
    CHECK(opened->incident_payload["status"] == "open");

    // Exactly at the threshold: no incident (strict >).
    cluster.score = 0.6;
    CHECK_FALSE(triage(cluster, config, assets, ids, 1000).has_value());

    // Sweep around the threshold.
    for (double score : {0.59, 0.599999, 0.6, 0.600001, 0.7}) {
        cluster.score = score;
        CHECK(triage(cluster, config, assets, ids, 0).has_value() == (score > 0.6));
    }
}

TEST_CASE("severity bands use the configured cut-points") {
    BandCutpoints cuts;
    CHECK(severity_band(0.0, cuts) == SeverityBand::low);
    CHECK(severity_band(0.39, cuts) == SeverityBand::low);
    CHECK(severity_band(0.4, cuts) == SeverityBand::medium);
    CHECK(severity_band(0.69, cuts) == SeverityBand::medium);
    CHECK(severity_band(0.7, cuts) == SeverityBand::high);
    CHECK(severity_band(1.0, cuts) == SeverityBand::high);
}

TEST_CASE("timeline entries are sorted ascending with a stable tie-break") {
    std::vector<TimelineEntry> entries = {
        {500, "t-b", "RawAlert"}, {100, "t-z", "RawAlert"}, {500, "t-a", "RevokeTokens"},
    };
    json payload = timeline_payload("inc-1", entries);
    REQUIRE(payload["entries"].size() == 3);
    CHECK(payload["entries"][0]["event_ref"] == "t-z");
    CHECK(payload["entries"][1]["event_ref"] == "t-a");
    CHECK(payload["entries"][2]["event_ref"] == "t-b");
}

TEST_CASE("the playbook table is exactly the declared policy matrix") {
    struct Expect {
        SeverityBand band;
        bool cj;
        std::vector<std::pair<std::string, bool>> actions;  // (oc_type, cosign)
    };
    const std::vector<Expect> table = {
        {SeverityBand::low, false, {{"OpenTicket", false}}},
        {SeverityBand::low, true, {{"OpenTicket", false}}},
        {SeverityBand::medium, false, {{"RevokeTokens", false}, {"ForcePasswordReset", false}}},
        {SeverityBand::medium, true, {{"RevokeTokens", true}, {"ForcePasswordReset", true}}},
        {SeverityBand::high, false,
         {{"RevokeTokens", false}, {"ForcePasswordReset", false}, {"OpenTicket", false}}},
        {SeverityBand::high, true,
         {{"RevokeTokens", true}, {"ForcePasswordReset", true}, {"OpenTicket", false}}},
    };
    for (const auto& expect : table) {
        auto actions = playbook_actions(expect.band, expect.cj);
        REQUIRE(actions.size() == expect.actions.size());
        for (std::size_t i = 0; i < actions.size(); ++i) {
            CHECK(actions[i].oc_type == expect.actions[i].first);
            CHECK(actions[i].requires_cosign == expect.actions[i].second);
        }
    }
}

TEST_CASE("aggregate_metrics counts bands, repeat assets, and the mean triage gap") {
    IdSource ids(9);
    std::vector<json> summaries;
    auto summary = [&](const std::string& band, const std::string& asset, SimTime cluster_at,
                       SimTime opened_at) {
        return json{{"incident_ref", ids.fresh("inc")},
                    {"severity_band", band},
                    {"crown_jewel_involved", asset == "srv-db-01"},
                    {"asset_id", asset},
                    {"action_count", 2},
                    {"outcome", "auto_contained"},
                    {"cluster_emitted_at", cluster_at},
                    {"opened_at", opened_at},
                    {"closed_at", opened_at + 1000}};
    };
    CHECK(aggregate_metrics({}, 0, 100, ids)["counts"]["total"] == 0);

    for (int i = 0; i < 3; ++i) summaries.push_back(summary("medium", "srv-db-01", 100, 300));
    for (int i = 0; i < 7; ++i)
        summaries.push_back(summary(i < 4 ? "low" : "high", "wks-" + std::to_string(i), 100, 500));
    json metrics = aggregate_metrics(summaries, 0, 10'000, ids);
    CHECK(metrics["counts"]["total"] == 10);
    CHECK(metrics["counts"]["medium"] == 3);
    CHECK(metrics["counts"]["low"] == 4);
    CHECK(metrics["counts"]["high"] == 3);
    REQUIRE(metrics["repeat_assets"].size() == 1);
    CHECK(metrics["repeat_assets"][0]["asset_id"] == "srv-db-01");
    CHECK(metrics["repeat_assets"][0]["count"] == 3);
    double expected_gap = (3 * 200.0 + 7 * 400.0) / 10.0;
    CHECK(metrics["mean_cluster_to_incident_ms"].get<double>() == doctest::Approx(expected_gap));
}

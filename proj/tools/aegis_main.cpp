#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "aegis/catalog.hpp"
#include "aegis/invariants.hpp"
#include "aegis/logio.hpp"
#include "aegis/scenario.hpp"

namespace {

using namespace aegis;

constexpr int kExitOk = 0;
constexpr int kExitViolations = 1;
constexpr int kExitUsage = 2;
constexpr int kExitConfig = 3;

SimTime parse_duration(const std::string& text) {
    if (text.empty()) fail(Errc::config_error, "empty duration");
    std::size_t pos = 0;
    double value = std::stod(text, &pos);
    std::string unit = text.substr(pos);
    if (unit == "ms" || unit.empty()) return static_cast<SimTime>(value);
    if (unit == "s") return static_cast<SimTime>(value * 1000);
    if (unit == "m") return static_cast<SimTime>(value * 60 * 1000);
    if (unit == "h") return static_cast<SimTime>(value * 3600 * 1000);
    fail(Errc::config_error, "unknown duration unit '" + unit + "'");
}

struct RunOptions {
    std::uint64_t seed = 42;
    std::string duration = "8h";
    std::string config_path;
    std::string out_dir = "run";
    double failure_rate = -1.0;
    std::string format = "text";
};

ScenarioConfig load_config(const RunOptions& opts, bool jml, bool soc) {
    ScenarioConfig config = ScenarioConfig::defaults();
    if (!opts.config_path.empty())
        config = ScenarioConfig::import_json(json::parse(read_file(opts.config_path)));
    config.seed = opts.seed;
    config.duration_ms = parse_duration(opts.duration);
    config.jml_enabled = jml;
    config.soc_enabled = soc;
    if (opts.failure_rate >= 0.0) {
        for (auto& e : config.endpoints) e.failure_rate = opts.failure_rate;
    }
    return config;
}

int run_command(const RunOptions& opts, bool jml, bool soc) {
    ScenarioConfig config = load_config(opts, jml, soc);
    Scenario scenario(config);
    RunResult result = scenario.run();
    write_run_outputs(opts.out_dir, result, config);
    if (opts.format == "json") {
        std::cout << to_json(result.report).dump(2) << "\n";
    } else {
        std::cout << "run complete: " << result.events.size() << " events, "
                  << result.report.incidents << " incidents, "
                  << result.report.task_outcomes.size() << " task outcome classes\n"
                  << "outputs in " << opts.out_dir << "/ (events.jsonl, graph.json, report.json, "
                  << "registry.json, config.json)\n"
                  << "audit: " << result.audit.violations.size() << " violation(s) over "
                  << result.audit.events_checked << " events\n";
    }
    return kExitOk;
}

struct LoadedRun {
    std::vector<SignedEvent> events;
    EvidenceGraph graph;
    IdentityRegistry registry;
    ScenarioConfig config;
};

LoadedRun load_run(const std::string& events_path, std::string graph_path,
                   std::string registry_path, std::string config_path) {
    namespace fs = std::filesystem;
    fs::path base = fs::path(events_path).parent_path();
    if (graph_path.empty()) graph_path = (base / "graph.json").string();
    if (registry_path.empty()) registry_path = (base / "registry.json").string();
    if (config_path.empty()) config_path = (base / "config.json").string();

    LoadedRun run;
    run.events = load_event_log(events_path);
    run.graph = EvidenceGraph::import_graph(json::parse(read_file(graph_path)));
    run.registry = IdentityRegistry::import_json(json::parse(read_file(registry_path)));
    run.config = fs::exists(config_path)
                     ? ScenarioConfig::import_json(json::parse(read_file(config_path)))
                     : ScenarioConfig::defaults();
    return run;
}

int audit_command(const std::string& events_path, const std::string& graph_path,
                  const std::string& registry_path, const std::string& config_path,
                  const std::string& format) {
    SchemaRegistry schemas;
    register_builtin_schemas(schemas);
    LoadedRun run = load_run(events_path, graph_path, registry_path, config_path);
    InvariantChecker checker{schemas, run.registry, run.graph, run.config.assets};
    AuditReport report = audit_log(run.events, checker);
    if (format == "json")
        std::cout << to_json(report).dump(2) << "\n";
    else
        std::cout << render_text(report);
    return report.clean() ? kExitOk : kExitViolations;
}

int report_command(const std::string& events_path, const std::string& config_path,
                   const std::string& format) {
    ScenarioConfig config = ScenarioConfig::defaults();
    namespace fs = std::filesystem;
    std::string cfg = config_path;
    if (cfg.empty()) {
        fs::path candidate = fs::path(events_path).parent_path() / "config.json";
        if (fs::exists(candidate)) cfg = candidate.string();
    }
    if (!cfg.empty()) config = ScenarioConfig::import_json(json::parse(read_file(cfg)));
    std::vector<SignedEvent> events = load_event_log(events_path);
    SloReport report = compute_slo_report(events, config);
    if (format == "json") {
        std::cout << to_json(report).dump(2) << "\n";
    } else {
        auto show = [](const char* name, const std::optional<SimTime>& v) {
            std::cout << "  " << name << ": ";
            if (v)
                std::cout << *v << " ms\n";
            else
                std::cout << "absent (no samples)\n";
        };
        std::cout << "slo report over " << events.size() << " events\n";
        show("joiner_p95", report.joiner_p95_ms);
        show("leaver_p95", report.leaver_p95_ms);
        show("mover_p95", report.mover_p95_ms);
        std::cout << "  sod_false_block_rate: "
                  << (report.sod_false_block_rate ? std::to_string(*report.sod_false_block_rate)
                                                  : "absent")
                  << "\n  rollback_success_rate: "
                  << (report.rollback_success_rate ? std::to_string(*report.rollback_success_rate)
                                                   : "absent")
                  << "\n  sla_breaches: " << report.sla_breaches << "\n";
    }
    return kExitOk;
}

int schemas_command(const std::string& action, const std::string& out_dir) {
    SchemaRegistry registry;
    register_builtin_schemas(registry);
    if (action == "list") {
        for (const auto* def : registry.list()) {
            std::cout << def->oc_type << " v" << def->version
                      << (def->state_changing ? " [state-changing]" : "") << "\n";
        }
        return kExitOk;
    }
    if (action == "validate") {
        // register_builtin_schemas already enforces structural invariants;
        // re-serialize and re-register to prove the files round-trip.
        SchemaRegistry check;
        for (const auto* def : registry.list())
            check.register_schema(SchemaRegistry::schema_from_json(SchemaRegistry::to_json(*def)));
        std::cout << "schema catalog ok: " << registry.list().size() << " schemas\n";
        return kExitOk;
    }
    if (action == "export") {
        std::filesystem::create_directories(out_dir);
        for (const auto* def : registry.list()) {
            std::string name =
                def->oc_type + "-v" + std::to_string(def->version) + ".json";
            write_file((std::filesystem::path(out_dir) / name).string(),
                       SchemaRegistry::to_json(*def).dump(2) + "\n");
        }
        write_file((std::filesystem::path(out_dir) / "agent-catalog.json").string(),
                   agent_catalog_json().dump(2) + "\n");
        std::cout << "exported " << registry.list().size() << " schemas to " << out_dir << "\n";
        return kExitOk;
    }
    std::cerr << "unknown schemas action '" << action << "' (list|validate|export)\n";
    return kExitUsage;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"governed multi-agent runtime kernel and simulator"};
    app.require_subcommand(1);

    RunOptions run_opts;
    std::string events_path, graph_path, registry_path, config_path, format = "text";
    std::string schemas_action = "list", schemas_out = "schemas";

    auto add_run_flags = [&](CLI::App* cmd) {
        cmd->add_option("--seed", run_opts.seed, "run seed");
        cmd->add_option("--duration", run_opts.duration, "simulated duration (e.g. 8h, 30m)");
        cmd->add_option("--config", run_opts.config_path, "scenario config JSON");
        cmd->add_option("--out", run_opts.out_dir, "output directory");
        cmd->add_option("--failure-rate", run_opts.failure_rate,
                        "override endpoint failure rate");
        cmd->add_option("--format", run_opts.format, "output format (json|text)");
    };
    auto* run_jml = app.add_subcommand("run-jml", "run the identity-lifecycle scenario");
    add_run_flags(run_jml);
    auto* run_soc = app.add_subcommand("run-soc", "run the SOC pipeline scenario");
    add_run_flags(run_soc);
    auto* run_all = app.add_subcommand("run-all", "run both scenarios in one simulation");
    add_run_flags(run_all);

    auto* audit = app.add_subcommand("audit", "check ecosystem invariants over an event log");
    audit->add_option("events", events_path, "events.jsonl path")->required();
    audit->add_option("--graph", graph_path, "graph.json path");
    audit->add_option("--registry", registry_path, "registry.json path");
    audit->add_option("--config", config_path, "config.json path");
    audit->add_option("--format", format, "output format (json|text)");

    auto* report = app.add_subcommand("report", "compute the SLO report from an event log");
    report->add_option("events", events_path, "events.jsonl path")->required();
    report->add_option("--config", config_path, "config.json path");
    report->add_option("--format", format, "output format (json|text)");

    auto* schemas = app.add_subcommand("schemas", "inspect the output-contract catalog");
    schemas->add_option("action", schemas_action, "list | validate | export");
    schemas->add_option("--out", schemas_out, "export directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : kExitUsage;
    }

    try {
        if (run_jml->parsed()) return run_command(run_opts, true, false);
        if (run_soc->parsed()) return run_command(run_opts, false, true);
        if (run_all->parsed()) return run_command(run_opts, true, true);
        if (audit->parsed())
            return audit_command(events_path, graph_path, registry_path, config_path, format);
        if (report->parsed()) return report_command(events_path, config_path, format);
        if (schemas->parsed()) return schemas_command(schemas_action, schemas_out);
    } catch (const aegis::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        if (e.code() == aegis::Errc::config_error || e.code() == aegis::Errc::parse_error)
            return kExitConfig;
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    }
    return kExitUsage;
}

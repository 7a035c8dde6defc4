// harsel: few-shot activity recognition pipeline driver.

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "acceptance_criteria.hpp"
#include "harsel/harsel.hpp"

namespace fs = std::filesystem;
using namespace harsel;

namespace {

struct Options {
    std::string config;
    std::string out = "runs";
    std::string strategy;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> threads;
    std::string llm_mode;
};

RunConfig resolve_config(const Options& o) {
    RunConfig cfg = o.config.empty() ? RunConfig{} : load_config(o.config);
    if (!o.strategy.empty()) cfg.strategies = {parse_strategy(o.strategy)};
    if (o.seed) cfg.seed = *o.seed;
    if (o.threads) cfg.threads = *o.threads;
    if (!o.llm_mode.empty()) cfg.llm.mode = parse_llm_mode(o.llm_mode);
    cfg.validate();
    return cfg;
}

std::string utc_timestamp() {
    const std::time_t t = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y%m%dT%H%M%SZ", &tm);
    return buf;
}

/// `<out>/<confighash>-<timestamp>`, suffixed rather than reused if present.
fs::path make_run_dir(const std::string& out, const RunConfig& cfg) {
    const std::string base = config_hash(cfg) + "-" + utc_timestamp();
    fs::path dir = fs::path(out) / base;
    for (int i = 1; fs::exists(dir); ++i) dir = fs::path(out) / (base + "-" + std::to_string(i));
    fs::create_directories(dir);
    return dir;
}

void write_file(const fs::path& p, const std::string& text) {
    fs::create_directories(p.parent_path());
    std::ofstream f(p, std::ios::binary);
    if (!f) throw Error("cannot write " + p.string());
    f << text;
}

template <class Writer>
void write_stream(const fs::path& p, Writer&& w) {
    std::ostringstream os;
    w(os);
    write_file(p, os.str());
}

void write_json(const fs::path& p, const nlohmann::ordered_json& j) { write_file(p, j.dump(2) + "\n"); }

void write_knowledge(const fs::path& dir, const Prepared& p) {
    write_json(dir / "semantic_features.json", to_json(p.knowledge.semantic));
    write_json(dir / "knowledge_prior.json", to_json(p.knowledge.prior));
    nlohmann::ordered_json prompts;
    for (const auto* b : {&p.knowledge.semantic_prompt, &p.knowledge.knowledge_prompt}) {
        if (b->user_text.empty()) continue;
        prompts[std::string(prompt_kind_name(b->kind))] = {{"hash", b->hash()},
                                                          {"model", b->model_name},
                                                          {"system", b->system_text},
                                                          {"user", b->user_text}};
    }
    write_json(dir / "prompts.json", prompts);
}

void write_features(const fs::path& dir, const Prepared& p) {
    write_stream(dir / "features" / "train.csv", [&](std::ostream& os) { write_feature_csv(os, p.features.train); });
    write_stream(dir / "features" / "val.csv", [&](std::ostream& os) { write_feature_csv(os, p.features.val); });
    write_stream(dir / "features" / "test.csv", [&](std::ostream& os) { write_feature_csv(os, p.features.test); });
    write_stream(dir / "scores.csv", [&](std::ostream& os) { write_score_csv(os, p.scoring.table); });
}

void write_selections(const fs::path& dir, const Comparison& c) {
    for (const auto& [s, set] : c.selections)
        write_stream(dir / "exemplars" / (std::string(strategy_name(s)) + ".csv"),
                     [&](std::ostream& os) { write_exemplar_csv(os, set); });
}

void write_models(const fs::path& dir, const Prepared& p, const Comparison& c) {
    for (std::size_t i = 0; i < c.cells.size(); ++i) {
        const auto& cell = c.cells[i];
        const std::string stem =
            std::string(strategy_name(cell.strategy)) + "__" + std::string(classifier_name(cell.classifier));
        write_json(dir / "models" / (stem + ".json"), c.models[i].to_json());
        write_stream(dir / "confusion" / (stem + ".csv"),
                     [&](std::ostream& os) { write_confusion_csv(os, cell.confusion); });
    }
    if (p.gate) write_json(dir / "models" / "gate.json", to_json(*p.gate));
}

nlohmann::ordered_json timing_json(const Prepared& p, const Comparison& c) {
    auto rows = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < c.cells.size(); ++i) {
        const auto& cell = c.cells[i];
        const double ms = time_inference(c.models[i], p.gate ? &*p.gate : nullptr, p.features.test.values,
                                         p.config.eval.timing_repeats);
        rows.push_back({{"strategy", std::string(strategy_name(cell.strategy))},
                        {"classifier", std::string(classifier_name(cell.classifier))},
                        {"gated", p.gate.has_value()},
                        {"ms_per_sample", ms}});
    }
    return {{"repeats", p.config.eval.timing_repeats}, {"rows", rows}};
}

struct RunContext {
    RunConfig cfg;
    fs::path dir;
    LlmClient llm;

    explicit RunContext(const Options& o) : cfg(resolve_config(o)), dir(make_run_dir(o.out, cfg)), llm(cfg.llm) {
        write_json(dir / "config.json", to_json(cfg));
    }
};

int cmd_run(RunContext& ctx, bool ablate, bool gate_study) {
    const auto p = prepare(ctx.cfg, ctx.llm);
    write_knowledge(ctx.dir, p);
    write_features(ctx.dir, p);
    const auto cmp = run_comparison(p);
    write_selections(ctx.dir, cmp);
    write_models(ctx.dir, p, cmp);

    auto report = prepared_json(p);
    report["comparison"] = to_json(cmp);
    std::string text = comparison_text(cmp, ctx.cfg.strategies, ctx.cfg.classifiers);
    if (ablate) {
        const auto ab = run_ablation(p);
        report["ablation"] = to_json(ab);
        text += "\n" + ablation_text(ab);
    }
    if (gate_study) {
        const auto g = run_gate_study(p);
        report["gate_study"] = to_json(g);
        text += "\n" + gate_text(g);
    }
    write_json(ctx.dir / "report.json", report);
    write_file(ctx.dir / "report.txt", text);
    write_json(ctx.dir / "timing.json", timing_json(p, cmp));
    std::cout << text << "\noutputs: " << ctx.dir.string() << "\n";
    return 0;
}

int cmd_knowledge(RunContext& ctx) {
    const auto p = prepare(ctx.cfg, ctx.llm);
    write_knowledge(ctx.dir, p);
    for (const auto& w : p.knowledge.warnings) std::cerr << "warning: " << w << "\n";
    std::cout << "knowledge written to " << ctx.dir.string() << "\n";
    return 0;
}

int cmd_select(RunContext& ctx) {
    const auto p = prepare(ctx.cfg, ctx.llm);
    write_features(ctx.dir, p);
    nlohmann::ordered_json summary = prepared_json(p);
    for (Strategy s : ctx.cfg.strategies) {
        const auto set = select_for(p, s, p.scoring.table);
        write_stream(ctx.dir / "exemplars" / (std::string(strategy_name(s)) + ".csv"),
                     [&](std::ostream& os) { write_exemplar_csv(os, set); });
        summary["selected"][std::string(strategy_name(s))] = set.all_rows().size();
    }
    write_json(ctx.dir / "selection.json", summary);
    std::cout << "exemplars written to " << ctx.dir.string() << "\n";
    return 0;
}

int cmd_ablate(RunContext& ctx) {
    const auto p = prepare(ctx.cfg, ctx.llm);
    const auto ab = run_ablation(p);
    auto report = prepared_json(p);
    report["ablation"] = to_json(ab);
    write_json(ctx.dir / "report.json", report);
    const auto text = ablation_text(ab);
    write_file(ctx.dir / "report.txt", text);
    std::cout << text << "\noutputs: " << ctx.dir.string() << "\n";
    return 0;
}

int cmd_bench(RunContext& ctx) {
    const auto p = prepare(ctx.cfg, ctx.llm);
    const auto cmp = run_comparison(p);
    const auto g = run_gate_study(p);
    auto report = prepared_json(p);
    report["gate_study"] = to_json(g);
    write_json(ctx.dir / "report.json", report);
    const auto timing = timing_json(p, cmp);
    write_json(ctx.dir / "timing.json", timing);
    std::ostringstream os;
    os << gate_text(g) << "\n";
    char buf[128];
    for (const auto& r : timing["rows"]) {
        std::snprintf(buf, sizeof buf, "%-12s %-12s %10.5f ms/sample\n", r["strategy"].get<std::string>().c_str(),
                      r["classifier"].get<std::string>().c_str(), r["ms_per_sample"].get<double>());
        os << buf;
    }
    write_file(ctx.dir / "report.txt", os.str());
    std::cout << os.str() << "\noutputs: " << ctx.dir.string() << "\n";
    return 0;
}

int cmd_check(const Options& o) {
    const RunConfig cfg = resolve_config(o);
    acceptance::SuiteOptions opt;
    opt.threads = cfg.threads;
    if (cfg.dataset.kind == "ucihar" && !cfg.dataset.path.empty())
        opt.ucihar_dir = cfg.dataset.path;
    else if (const char* dir = std::getenv("HARSEL_UCIHAR_DIR"); dir && *dir)
        opt.ucihar_dir = dir;
    if (!cfg.llm.fixture_dir.empty()) opt.prior_text = LlmClient(cfg.llm).fixture_text(PromptKind::Knowledge);
    int failures = 0;
    for (const auto& r : acceptance::run_suite(opt)) {
        std::cout << acceptance::format_line(r) << std::endl;
        failures += r.status == acceptance::Status::Fail;
    }
    return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"harsel: LLM-guided exemplar selection for few-shot activity recognition"};
    app.require_subcommand(1);
    Options o;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", o.config, "Run configuration (JSON)");
        sub->add_option("--out", o.out, "Parent directory for run outputs")->capture_default_str();
        sub->add_option("--strategy", o.strategy, "Only this strategy (llm_guided|random|herding|kcenter|top_score)");
        sub->add_option("--seed", o.seed, "Global seed override");
        sub->add_option("--threads", o.threads, "Worker cap");
        sub->add_option("--llm-mode", o.llm_mode, "fixture|live|cache-first");
    };

    auto* run = app.add_subcommand("run", "Full pipeline: comparison, ablation, gate study, artifacts");
    auto* knowledge = app.add_subcommand("knowledge", "Produce validated semantic spec and knowledge prior");
    auto* select = app.add_subcommand("select", "Score candidates and write exemplar sets");
    auto* eval = app.add_subcommand("eval", "Strategy x classifier comparison");
    auto* ablate = app.add_subcommand("ablate", "Component ablation");
    auto* bench = app.add_subcommand("bench", "Gate on/off study and inference timing");
    auto* check = app.add_subcommand("check", "Run the acceptance suite");
    for (auto* s : {run, knowledge, select, eval, ablate, bench, check}) add_common(s);

    CLI11_PARSE(app, argc, argv);

    std::optional<RunContext> ctx;
    try {
        if (check->parsed()) return cmd_check(o);
        ctx.emplace(o);
        if (run->parsed()) return cmd_run(*ctx, true, true);
        if (knowledge->parsed()) return cmd_knowledge(*ctx);
        if (select->parsed()) return cmd_select(*ctx);
        if (eval->parsed()) return cmd_run(*ctx, false, false);
        if (ablate->parsed()) return cmd_ablate(*ctx);
        if (bench->parsed()) return cmd_bench(*ctx);
    } catch (const StageError& e) {
        std::cerr << "error: stage " << e.stage() << " failed: " << e.what() << "\n";
        if (ctx) write_file(ctx->dir / "FAILED", std::string(e.what()) + "\n");
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        if (ctx) write_file(ctx->dir / "FAILED", std::string(e.what()) + "\n");
        return 2;
    }
    return 0;
}

// moseg: multi-model motion segmentation of sparse feature trajectories.
//
// Subcommands: synth, hypothesize, kernel, segment, select, eval, pipeline.
// Exit codes: 0 ok, 2 input error, 3 numerical failure.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>

#include <CLI11.hpp>
#include <json.hpp>

#include "moseg/errors.hpp"
#include "moseg/eval.hpp"
#include "moseg/hypgen.hpp"
#include "moseg/pipeline.hpp"
#include "moseg/synth.hpp"

namespace {

using namespace moseg;

TrackFormat format_of(const std::string& path, const std::string& forced) {
    if (forced == "tsv") return TrackFormat::Tsv;
    if (forced == "json") return TrackFormat::Json;
    if (!forced.empty()) throw InputError("unknown format '" + forced + "'");
    return path.size() > 5 && path.substr(path.size() - 5) == ".json" ? TrackFormat::Json
                                                                      : TrackFormat::Tsv;
}

std::vector<ModelKind> parse_models(const std::string& spec) {
    std::vector<ModelKind> models;
    std::stringstream ss(spec);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok == "a" || tok == "affine")
            models.push_back(ModelKind::Affine);
        else if (tok == "h" || tok == "homography")
            models.push_back(ModelKind::Homography);
        else if (tok == "f" || tok == "fundamental")
            models.push_back(ModelKind::Fundamental);
        else
            throw InputError("unknown model '" + tok + "' (expected a, h or f)");
    }
    if (models.empty()) throw InputError("--models must name at least one model");
    return models;
}

FusionScheme parse_fusion(const std::string& name) {
    if (name == "single") return FusionScheme::Single;
    if (name == "keradd") return FusionScheme::KernelAddition;
    if (name == "coreg") return FusionScheme::CoReg;
    if (name == "subset") return FusionScheme::Subset;
    throw InputError("unknown fusion scheme '" + name +
                     "' (expected single, keradd, coreg or subset)");
}

ModelKind parse_one_model(const std::string& name) {
    const auto models = parse_models(name);
    if (models.size() != 1) throw InputError("expected exactly one model");
    return models.front();
}

struct CommonFlags {
    std::string models = "a,h,f";
    std::string fusion = "subset";
    std::string num_motions = "auto";
    int per_pair = 500;
    double h_frac = 0.1;
    double eps_quantile = 0.9;
    double lambda = 1e-2;
    double gamma = 1e-2;
    double delta = 0.1;
    int m_min = 1;
    int m_max = 10;
    int restarts = 20;
    std::uint64_t seed = 0;
};

void add_common_flags(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("--models", flags.models, "Comma list of a,h,f")->capture_default_str();
    cmd->add_option("--fusion", flags.fusion, "single | keradd | coreg | subset")
        ->capture_default_str();
    cmd->add_option("--num-motions", flags.num_motions, "Motion count or 'auto'")
        ->capture_default_str();
    cmd->add_option("--per-pair", flags.per_pair, "Hypotheses per frame pair")
        ->capture_default_str();
    cmd->add_option("--h-frac", flags.h_frac, "ORK top-h fraction")->capture_default_str();
    cmd->add_option("--eps-quantile", flags.eps_quantile, "Sparsification quantile")
        ->capture_default_str();
    cmd->add_option("--lambda", flags.lambda, "Co-regularization weight")->capture_default_str();
    cmd->add_option("--gamma", flags.gamma, "Subset constraint weight")->capture_default_str();
    cmd->add_option("--delta", flags.delta, "Model-selection fidelity weight")
        ->capture_default_str();
    cmd->add_option("--m-min", flags.m_min, "Smallest candidate motion count")
        ->capture_default_str();
    cmd->add_option("--m-max", flags.m_max, "Largest candidate motion count")
        ->capture_default_str();
    cmd->add_option("--restarts", flags.restarts, "K-means restarts")->capture_default_str();
    cmd->add_option("--seed", flags.seed, "RNG seed")->capture_default_str();
}

PipelineConfig config_from(const CommonFlags& flags) {
    PipelineConfig cfg;
    cfg.models = parse_models(flags.models);
    cfg.fusion = parse_fusion(flags.fusion);
    if (flags.num_motions == "auto")
        cfg.num_motions = 0;
    else
        cfg.num_motions = std::stoi(flags.num_motions);
    cfg.per_pair = flags.per_pair;
    cfg.h_frac = flags.h_frac;
    cfg.eps_quantile = flags.eps_quantile;
    cfg.lambda = flags.lambda;
    cfg.gamma = flags.gamma;
    cfg.delta = flags.delta;
    cfg.m_min = flags.m_min;
    cfg.m_max = flags.m_max;
    cfg.restarts = flags.restarts;
    cfg.seed = flags.seed;
    validate_config(cfg);
    return cfg;
}

std::filesystem::path run_directory(const std::string& input_path, std::uint64_t seed) {
    const char* root = std::getenv("MOSEG_RUN_DIR");
    const std::filesystem::path base = root && *root ? root : "runs";
    const std::string stem = std::filesystem::path(input_path).stem().string();
    return base / (stem + "-seed" + std::to_string(seed));
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw InputError(path.string() + ": cannot open for writing");
    out << text;
}

void write_labels(const std::filesystem::path& path, const Assignment& a) {
    std::ofstream out(path);
    if (!out) throw InputError(path.string() + ": cannot open for writing");
    for (int v : a.labels) out << v << '\n';
}

std::string selection_csv(const SelectionResult& sel) {
    std::ostringstream out;
    out << "m,ncut,recon,residual\n";
    for (const auto& c : sel.candidates) {
        if (c.degenerate)
            out << c.M << ",,,\n";
        else
            out << c.M << ',' << c.ncut << ',' << c.recon << ',' << c.residual << '\n';
    }
    return out.str();
}

std::string per_sequence_csv(const EvalReport& report) {
    std::ostringstream out;
    out << "sequence,error,selected_m,true_m\n";
    for (const auto& s : report.sequences) {
        out << s.name << ',' << s.error << ',';
        if (s.selected_m) out << *s.selected_m;
        out << ',';
        if (s.true_m) out << *s.true_m;
        out << '\n';
    }
    return out.str();
}

std::optional<int> true_motion_count(const TrackSet& ts) {
    if (!ts.labels) return std::nullopt;
    std::set<int> groups(ts.labels->begin(), ts.labels->end());
    return static_cast<int>(groups.size());
}

int run_synth(const std::string& preset, const std::string& spec_path, std::uint64_t seed,
              double noise, int injected, const std::string& out_path,
              const std::string& format, const std::string& emit_spec) {
    SceneSpec spec;
    if (!spec_path.empty()) {
        spec = scene_spec_from_json_file(spec_path);
    } else {
        spec = make_preset_scene(preset, seed, noise);
        spec.num_injected_outliers = injected;
    }
    const SceneResult scene = generate_scene(spec);
    save_trackset(scene.tracks, out_path, format_of(out_path, format));
    if (!emit_spec.empty()) write_text(emit_spec, scene_spec_to_json_text(spec));
    std::cout << "wrote " << out_path << ": N=" << scene.tracks.num_points()
              << " F=" << scene.tracks.num_frames()
              << " injected=" << scene.injected_indices.size()
              << " dropped=" << scene.dropped_short_tracks << '\n';
    return 0;
}

int run_hypothesize(const std::string& input, const std::string& format,
                    const std::string& model, int per_pair, std::uint64_t seed,
                    const std::string& residuals_out) {
    const TrackSet ts = load_trackset(input, format_of(input, format)).tracks;
    const ModelKind kind = parse_one_model(model);
    const HypothesisSet hyps = generate_hypotheses(ts, kind, per_pair, seed);
    for (const auto& w : hyps.warnings) std::cerr << "warning: " << w << '\n';
    const ResidualMatrix rm = compute_residuals(ts, hyps.hypotheses);
    write_residuals(rm, residuals_out);
    std::cout << "wrote " << residuals_out << ": K=" << rm.values.cols()
              << " hypotheses for N=" << rm.values.rows() << " points\n";
    return 0;
}

int run_kernel(const std::string& input, const std::string& format,
               const std::string& residuals_in, const std::string& model, int per_pair,
               double h_frac, double eps_quantile, std::uint64_t seed,
               const std::string& kernel_out) {
    const TrackSet ts = load_trackset(input, format_of(input, format)).tracks;
    ResidualMatrix rm;
    if (!residuals_in.empty()) {
        rm = read_residuals(residuals_in);
    } else {
        const ModelKind kind = parse_one_model(model);
        const HypothesisSet hyps = generate_hypotheses(ts, kind, per_pair, seed);
        for (const auto& w : hyps.warnings) std::cerr << "warning: " << w << '\n';
        rm = compute_residuals(ts, hyps.hypotheses);
    }
    const OrkResult ork = build_ork_kernel(rm, ts, h_frac);
    if (ork.zero_residual_points > 0)
        std::cerr << "warning: " << ork.zero_residual_points
                  << " points with no finite residual\n";
    const AffinityKernel kern = sparsify(ork.kernel, eps_quantile);
    write_kernel(kern, kernel_out);
    std::cout << "wrote " << kernel_out << ": N=" << kern.size() << '\n';
    return 0;
}

int run_segment(const std::vector<std::string>& inputs, const std::string& format,
                const CommonFlags& flags, bool emit_run_dir) {
    const PipelineConfig cfg = config_from(flags);
    std::vector<SequenceEval> evals;
    for (const auto& input : inputs) {
        const TrackSet ts = load_trackset(input, format_of(input, format)).tracks;
        const PipelineResult res = run_pipeline(cfg, ts);
        for (const auto& w : res.warnings) std::cerr << "warning: " << w << '\n';

        const std::string name = std::filesystem::path(input).stem().string();
        SequenceEval ev;
        ev.name = name;
        if (res.error) ev.error = *res.error;
        if (res.selection) ev.selected_m = res.selection->best_m;
        ev.true_m = true_motion_count(ts);

        if (emit_run_dir) {
            const auto dir = run_directory(input, cfg.seed);
            std::filesystem::create_directories(dir);
            write_labels(dir / "labels.txt", res.assignment);
            nlohmann::json run;
            run["config"] = nlohmann::json::parse(config_json(cfg));
            run["input"] = input;
            run["input_hash"] = file_hash_hex(input);
            run["num_motions_used"] = res.assignment.num_clusters;
            if (res.error) run["classification_error"] = *res.error;
            write_text(dir / "run.json", run.dump(2) + "\n");
            if (res.selection) {
                write_text(dir / "selection.json", selection_report_json(*res.selection));
                write_text(dir / "residual_curve.csv", selection_csv(*res.selection));
            }
            std::cout << "run artifacts in " << dir.string() << '\n';
        } else {
            for (int v : res.assignment.labels) std::cout << v << '\n';
        }

        std::cerr << name << ": M=" << res.assignment.num_clusters;
        if (res.error) std::cerr << " error=" << *res.error;
        std::cerr << '\n';
        if (res.error || ev.true_m) evals.push_back(std::move(ev));
    }
    if (inputs.size() > 1 && !evals.empty()) {
        const EvalReport report = make_report(std::move(evals));
        std::cerr << report_table(report);
        if (emit_run_dir) {
            const char* root = std::getenv("MOSEG_RUN_DIR");
            const std::filesystem::path base = root && *root ? root : "runs";
            std::filesystem::create_directories(base);
            write_text(base / "report.json", report_json(report));
            write_text(base / "per_sequence.csv", per_sequence_csv(report));
        }
    }
    return 0;
}

int run_select(const std::string& input, const std::string& format, const CommonFlags& flags,
               const std::string& report_out, const std::string& csv_out) {
    CommonFlags adjusted = flags;
    adjusted.num_motions = "auto";
    const PipelineConfig cfg = config_from(adjusted);
    const TrackSet ts = load_trackset(input, format_of(input, format)).tracks;
    const PipelineResult res = run_pipeline(cfg, ts);
    for (const auto& w : res.warnings) std::cerr << "warning: " << w << '\n';
    std::cout << selection_report_json(*res.selection);
    if (!report_out.empty()) write_text(report_out, selection_report_json(*res.selection));
    if (!csv_out.empty()) write_text(csv_out, selection_csv(*res.selection));
    return 0;
}

int run_eval(const std::string& input, const std::string& format,
             const std::string& labels_path, bool as_json) {
    const TrackSet ts = load_trackset(input, format_of(input, format)).tracks;
    if (!ts.labels) throw InputError(input + ": ground-truth labels required for eval");
    std::ifstream in(labels_path);
    if (!in) throw InputError(labels_path + ": cannot open for reading");
    std::vector<int> pred_labels;
    int v;
    while (in >> v) pred_labels.push_back(v);
    if (static_cast<int>(pred_labels.size()) != ts.num_points())
        throw InputError(labels_path + ": expected " + std::to_string(ts.num_points()) +
                         " labels, got " + std::to_string(pred_labels.size()));
    Assignment pred;
    pred.labels = pred_labels;
    pred.num_clusters = *std::max_element(pred_labels.begin(), pred_labels.end());
    SequenceEval ev;
    ev.name = std::filesystem::path(input).stem().string();
    ev.error = classification_error(pred, *ts.labels);
    ev.true_m = true_motion_count(ts);
    const EvalReport report = make_report({ev});
    std::cout << (as_json ? report_json(report) : report_table(report));
    std::cout << "prevalence baseline: " << prevalence_baseline(*ts.labels) << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-model 3D rigid motion segmentation"};
    app.require_subcommand(1);

    // synth
    auto* synth = app.add_subcommand("synth", "Generate a synthetic scene");
    std::string synth_preset = "two-body-general", synth_spec, synth_out = "scene.tsv",
                synth_format, synth_emit_spec;
    std::uint64_t synth_seed = 0;
    double synth_noise = 0.0;
    int synth_injected = 0;
    synth->add_option("--preset", synth_preset,
                      "two-body-general | three-body-general | rotation-dominant-planes | "
                      "strong-forward-translation")
        ->capture_default_str();
    synth->add_option("--spec", synth_spec, "Scene spec JSON (overrides --preset)");
    synth->add_option("--seed", synth_seed, "RNG seed")->capture_default_str();
    synth->add_option("--noise", synth_noise, "Pixel noise sigma")->capture_default_str();
    synth->add_option("--injected-outliers", synth_injected, "Body-switching tracks to inject")
        ->capture_default_str();
    synth->add_option("--out", synth_out, "Output trajectory file")->capture_default_str();
    synth->add_option("--format", synth_format, "tsv | json (default: by extension)");
    synth->add_option("--emit-spec", synth_emit_spec, "Also write the scene spec JSON here");

    // hypothesize
    auto* hyp = app.add_subcommand("hypothesize", "Sample hypotheses and cache residuals");
    std::string hyp_input, hyp_format, hyp_model = "h", hyp_out = "residuals.bin";
    int hyp_per_pair = 500;
    std::uint64_t hyp_seed = 0;
    hyp->add_option("--input", hyp_input, "Trajectory file")->required();
    hyp->add_option("--format", hyp_format, "tsv | json (default: by extension)");
    hyp->add_option("--model", hyp_model, "a | h | f")->capture_default_str();
    hyp->add_option("--per-pair", hyp_per_pair, "Hypotheses per frame pair")
        ->capture_default_str();
    hyp->add_option("--seed", hyp_seed, "RNG seed")->capture_default_str();
    hyp->add_option("--out", hyp_out, "Residual cache output")->capture_default_str();

    // kernel
    auto* kern = app.add_subcommand("kernel", "Build an ORK affinity kernel");
    std::string kern_input, kern_format, kern_residuals, kern_model = "h",
                kern_out = "kernel.bin";
    int kern_per_pair = 500;
    double kern_h_frac = 0.1, kern_eps = 0.9;
    std::uint64_t kern_seed = 0;
    kern->add_option("--input", kern_input, "Trajectory file")->required();
    kern->add_option("--format", kern_format, "tsv | json (default: by extension)");
    kern->add_option("--residuals", kern_residuals, "Residual cache (skips hypothesis sampling)");
    kern->add_option("--model", kern_model, "a | h | f")->capture_default_str();
    kern->add_option("--per-pair", kern_per_pair, "Hypotheses per frame pair")
        ->capture_default_str();
    kern->add_option("--h-frac", kern_h_frac, "ORK top-h fraction")->capture_default_str();
    kern->add_option("--eps-quantile", kern_eps, "Sparsification quantile")
        ->capture_default_str();
    kern->add_option("--seed", kern_seed, "RNG seed")->capture_default_str();
    kern->add_option("--out", kern_out, "Kernel output")->capture_default_str();

    // segment
    auto* seg = app.add_subcommand("segment", "Segment trajectories into motions");
    std::vector<std::string> seg_inputs;
    std::string seg_format;
    CommonFlags seg_flags;
    seg->add_option("--input", seg_inputs, "Trajectory file(s)")->required();
    seg->add_option("--format", seg_format, "tsv | json (default: by extension)");
    add_common_flags(seg, seg_flags);

    // select
    auto* sel = app.add_subcommand("select", "Estimate the number of motions");
    std::string sel_input, sel_format, sel_report, sel_csv;
    CommonFlags sel_flags;
    sel->add_option("--input", sel_input, "Trajectory file")->required();
    sel->add_option("--format", sel_format, "tsv | json (default: by extension)");
    sel->add_option("--report", sel_report, "Write the selection report JSON here");
    sel->add_option("--csv", sel_csv, "Write the residual curve CSV here");
    add_common_flags(sel, sel_flags);

    // eval
    auto* ev = app.add_subcommand("eval", "Score predicted labels against ground truth");
    std::string ev_input, ev_format, ev_labels;
    bool ev_json = false;
    ev->add_option("--input", ev_input, "Trajectory file with ground-truth labels")->required();
    ev->add_option("--format", ev_format, "tsv | json (default: by extension)");
    ev->add_option("--labels", ev_labels, "Predicted labels, one per line")->required();
    ev->add_flag("--json", ev_json, "Emit JSON instead of a table");

    // pipeline
    auto* pipe = app.add_subcommand("pipeline",
                                    "Full run with artifacts cached to the run directory");
    std::vector<std::string> pipe_inputs;
    std::string pipe_format;
    CommonFlags pipe_flags;
    pipe->add_option("--input", pipe_inputs, "Trajectory file(s)")->required();
    pipe->add_option("--format", pipe_format, "tsv | json (default: by extension)");
    add_common_flags(pipe, pipe_flags);

    try {
        app.parse(argc, argv);
        if (*synth)
            return run_synth(synth_preset, synth_spec, synth_seed, synth_noise, synth_injected,
                             synth_out, synth_format, synth_emit_spec);
        if (*hyp)
            return run_hypothesize(hyp_input, hyp_format, hyp_model, hyp_per_pair, hyp_seed,
                                   hyp_out);
        if (*kern)
            return run_kernel(kern_input, kern_format, kern_residuals, kern_model,
                              kern_per_pair, kern_h_frac, kern_eps, kern_seed, kern_out);
        if (*seg) return run_segment(seg_inputs, seg_format, seg_flags, false);
        if (*sel) return run_select(sel_input, sel_format, sel_flags, sel_report, sel_csv);
        if (*ev) return run_eval(ev_input, ev_format, ev_labels, ev_json);
        if (*pipe) return run_segment(pipe_inputs, pipe_format, pipe_flags, true);
        return 2;
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    } catch (const InputError& e) {
        std::cerr << "input error: " << e.what() << '\n';
        return 2;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}

#include "remtrack/cli.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "remtrack/io.hpp"
#include "remtrack/metrics.hpp"
#include "remtrack/pipeline.hpp"
#include "remtrack/rem.hpp"
#include "remtrack/tracker.hpp"
#include "remtrack/training.hpp"

namespace remtrack::cli {
namespace {

namespace fs = std::filesystem;

struct Options {
    std::string scenario;
    std::string sequence;
    std::string checkpoint;
    std::string gt;
    std::string pred;
    std::string out;
    std::string mode = "relation_aware";
    std::string alphas;
    std::string grid = "5,10,20,30,40";
    double d_th = 15.0;
    std::size_t dim = 128;
    int window = 10;
    double lr = 1e-4;
    int epochs = 50;
    std::uint64_t seed = 0;
    int sequences = 64;
    int eval_sequences = 4;
    int windows_per_sequence = 1;
    int stride = 5;
    double epsilon = 1e-5;
    std::optional<double> det_noise;
    bool quiet = false;
};

std::vector<double> parse_list(const std::string& text, const char* what) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw std::invalid_argument(std::string("invalid ") + what + " value '" + item + "'");
        }
    }
    if (out.empty()) throw std::invalid_argument(std::string("empty ") + what + " list");
    return out;
}

std::vector<double> alpha_grid(const Options& o) {
    return o.alphas.empty() ? metrics::default_alpha_grid() : parse_list(o.alphas, "--alphas");
}

void require_file(const std::string& path, const char* flag) {
    if (path.empty()) throw std::invalid_argument(std::string(flag) + " is required");
    if (!fs::exists(path)) throw std::runtime_error(std::string("input file not found: ") + path);
}

/// Scenario config from --scenario (if given) with --seed and --det-noise applied.
sim::ScenarioConfig scenario_config(const Options& o) {
    sim::ScenarioConfig c;
    if (!o.scenario.empty()) {
        require_file(o.scenario, "--scenario");
        c = sim::scenario_from_json(io::read_json_file(o.scenario));
    }
    c.seed = o.seed;
    if (o.det_noise) c.det_center_std = *o.det_noise;
    c.validate();
    return c;
}

fs::path output_dir(const Options& o) {
    fs::path dir = o.out.empty() ? fs::path(".") : fs::path(o.out);
    fs::create_directories(dir);
    return dir;
}

/// The sequence to work on: --sequence JSONL with detections drawn under the
/// scenario's noise, or a freshly generated scenario.
train::TrainingSequence load_sequence(const Options& o) {
    const sim::ScenarioConfig c = scenario_config(o);
    if (o.sequence.empty()) return pipeline::make_sequence(c);
    require_file(o.sequence, "--sequence");
    train::TrainingSequence seq;
    seq.gt = io::read_scenario_jsonl(io::read_text_file(o.sequence));
    seq.detections = sim::detect_sequence(seq.gt, c, pipeline::detection_seed(c.seed));
    return seq;
}

track::Model load_model(const Options& o) {
    require_file(o.checkpoint, "--checkpoint");
    return track::Model::from_json(io::read_json_file(o.checkpoint));
}

BoxSequence load_boxes(const std::string& path, const char* flag) {
    require_file(path, flag);
    const std::string text = io::read_text_file(path);
    if (fs::path(path).extension() == ".jsonl") return io::gt_boxes(io::read_scenario_jsonl(text));
    return io::to_box_sequence(io::parse_mot_csv(text));
}

/// Shortest round-trip spelling, for file names ("5", "2.5").
std::string shortest(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

int cmd_gen(const Options& o, std::ostream& out) {
    const auto gt = sim::generate(scenario_config(o));
    const std::string text = io::write_scenario_jsonl(gt);
    if (o.out.empty()) {
        out << text;
    } else {
        io::write_text_file(o.out, text);
        out << "wrote " << gt.frame_count() << " frames to " << o.out << '\n';
    }
    return 0;
}

int cmd_train(const Options& o, std::ostream& out) {
    const sim::ScenarioConfig base = scenario_config(o);
    const auto data = pipeline::make_dataset(base, o.sequences, o.seed);
    track::ModelConfig mc = pipeline::default_model_config(base);
    mc.dim = o.dim;
    mc.d_th = o.d_th;
    mc.window = o.window;
    track::Model model = track::Model::create(mc, o.seed);

    train::TrainConfig tc;
    tc.epochs = o.epochs;
    tc.window = o.window;
    tc.lr = o.lr;
    tc.seed = o.seed;
    tc.windows_per_sequence = o.windows_per_sequence;
    if (!o.quiet) {
        tc.on_epoch = [&](int epoch, double loss) {
            out << "epoch " << epoch + 1 << " loss " << io::format_fixed6(loss) << '\n' << std::flush;
        };
    }
    const auto result = train::train(model, data, tc);
    for (const auto& w : result.warnings) out << "warning: " << w << '\n';

    const fs::path dir = output_dir(o);
    io::write_json_file((dir / "checkpoint.json").string(), model.to_json());
    std::string curve = "epoch,loss\n";
    for (std::size_t e = 0; e < result.epoch_loss.size(); ++e) {
        curve += std::to_string(e + 1) + ',' + io::format_fixed6(result.epoch_loss[e]) + '\n';
    }
    io::write_text_file((dir / "loss_curve.csv").string(), curve);
    io::write_json_file((dir / "train_summary.json").string(),
                        {{"initial_loss", result.initial_loss},
                         {"final_loss", result.final_loss},
                         {"epochs", o.epochs},
                         {"sequences", o.sequences}});
    out << "initial loss " << io::format_fixed6(result.initial_loss) << ", final loss "
        << io::format_fixed6(result.final_loss) << '\n';
    return 0;
}

int cmd_track(const Options& o, std::ostream& out) {
    const track::Model model = load_model(o);
    const auto seq = load_sequence(o);
    const auto output = pipeline::run_tracking(model, seq, track::parse_mode(o.mode));
    const std::string text = io::write_results_csv(track::to_box_sequence(output));
    if (o.out.empty()) {
        out << text;
    } else {
        io::write_text_file(o.out, text);
        out << "wrote tracks for " << output.size() << " frames to " << o.out << '\n';
    }
    return 0;
}

int cmd_eval(const Options& o, std::ostream& out) {
    const BoxSequence gt = load_boxes(o.gt, "--gt");
    BoxSequence pred = load_boxes(o.pred, "--pred");
    if (pred.size() < gt.size()) pred.resize(gt.size());
    const auto alphas = alpha_grid(o);
    const auto report = metrics::evaluate(gt, pred, alphas);
    const auto doc = metrics::to_json(report);
    if (o.out.empty()) {
        out << doc.dump(2) << '\n';
        return 0;
    }
    const fs::path dir = output_dir(o);
    io::write_json_file((dir / "metrics.json").string(), doc);
    io::write_text_file((dir / "hota_curve.csv").string(), metrics::hota_curve_csv(report.hota));
    out << "MOTA " << io::format_fixed6(report.clear.mota) << " IDF1 "
        << io::format_fixed6(report.idf1) << " HOTA " << io::format_fixed6(report.hota.hota)
        << '\n';
    return 0;
}

int cmd_relations(const Options& o, std::ostream& out) {
    const track::Model model = load_model(o);
    const auto seq = load_sequence(o);
    const auto values = pipeline::gt_relations(model, seq.gt, o.stride);
    std::string text;
    for (const auto& v : values) {
        text += nlohmann::json{{"t", v.t}, {"i", v.i}, {"j", v.j}, {"R", v.value}}.dump() + '\n';
    }
    if (o.out.empty()) {
        out << text;
    } else {
        io::write_text_file(o.out, text);
        out << "wrote " << values.size() << " relation scores to " << o.out << '\n';
    }
    return 0;
}

int cmd_ablate(const Options& o, std::ostream& out) {
    pipeline::AblationConfig ac;
    ac.d_th_grid = parse_list(o.grid, "--grid");
    ac.scenario = scenario_config(o);
    ac.train_sequences = o.sequences;
    ac.eval_sequences = o.eval_sequences;
    ac.model = pipeline::default_model_config(ac.scenario);
    ac.model.dim = o.dim;
    ac.model.window = o.window;
    ac.training.epochs = o.epochs;
    ac.training.window = o.window;
    ac.training.lr = o.lr;
    ac.training.seed = o.seed;
    ac.training.windows_per_sequence = o.windows_per_sequence;
    ac.alphas = alpha_grid(o);
    const auto rows = pipeline::ablate(ac);

    const fs::path dir = output_dir(o);
    std::string table = "d_th,MOTA,IDF1,HOTA,MT,ML,initial_loss,final_loss\n";
    for (const auto& r : rows) {
        io::write_json_file((dir / ("metrics_dth_" + shortest(r.d_th) + ".json")).string(),
                            metrics::to_json(r.report));
        table += io::format_fixed6(r.d_th) + ',' + io::format_fixed6(r.report.clear.mota) + ',' +
                 io::format_fixed6(r.report.idf1) + ',' + io::format_fixed6(r.report.hota.hota) +
                 ',' + io::format_fixed6(r.report.coverage.mostly_tracked) + ',' +
                 io::format_fixed6(r.report.coverage.mostly_lost) + ',' +
                 io::format_fixed6(r.initial_loss) + ',' + io::format_fixed6(r.final_loss) + '\n';
    }
    io::write_text_file((dir / "ablation.csv").string(), table);
    out << table;
    return 0;
}

int cmd_gradcheck(const Options& o, std::ostream& out) {
    const auto report = pipeline::model_gradient_check(o.seed, o.dim, o.epsilon);
    out << "max relative error " << report.max_relative_error << " (" << report.entries_checked
        << " entries; worst " << report.worst_parameter << '[' << report.worst_index << "], analytic " << report.analytic << ", numeric " << report.numeric << ")\n";
    return report.max_relative_error < 1e-4 ? 0 : 1;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Relation-encoding multi-object tracker on synthetic crowd scenes", "remtrack"};
    app.require_subcommand(1);
    Options o;

    auto scenario_flags = [&](CLI::App* c) {
        c->add_option("--scenario", o.scenario, "Scenario config (JSON)");
        c->add_option("--seed", o.seed, "Random seed");
        c->add_option("--det-noise", o.det_noise, "Detection center noise std (scene units)");
    };
    auto model_flags = [&](CLI::App* c) {
        c->add_option("--dim", o.dim, "Relation embedding dimension F")->check(CLI::PositiveNumber);
        c->add_option("--d-th", o.d_th, "Graph distance threshold")->check(CLI::PositiveNumber);
        c->add_option("--window", o.window, "Frames per training window")->check(CLI::PositiveNumber);
        c->add_option("--lr", o.lr, "Adam learning rate")->check(CLI::NonNegativeNumber);
        c->add_option("--epochs", o.epochs, "Training epochs")->check(CLI::NonNegativeNumber);
        c->add_option("--sequences", o.sequences, "Training scenarios")->check(CLI::PositiveNumber);
        c->add_option("--windows-per-sequence", o.windows_per_sequence,
                      "Windows drawn per scenario and epoch")
            ->check(CLI::PositiveNumber);
    };

    auto* gen = app.add_subcommand("gen", "Generate a scenario as JSON lines");
    scenario_flags(gen);
    gen->add_option("--out", o.out, "Output file (default stdout)");

    auto* tr = app.add_subcommand("train", "Train the encoder and heads; writes checkpoint and loss curve");
    scenario_flags(tr);
    model_flags(tr);
    tr->add_option("--out", o.out, "Output directory");
    tr->add_flag("--quiet", o.quiet, "Do not print per-epoch losses");

    auto* trk = app.add_subcommand("track", "Track one scenario; writes MOT results CSV");
    scenario_flags(trk);
    trk->add_option("--sequence", o.sequence, "Scenario JSON lines (default: generate from --scenario)");
    trk->add_option("--checkpoint", o.checkpoint, "Model checkpoint")->required();
    trk->add_option("--mode", o.mode, "baseline | relation_aware | relations_for_occluded");
    trk->add_option("--out", o.out, "Output CSV (default stdout)");

    auto* ev = app.add_subcommand("eval", "Score predictions; writes metrics JSON and per-alpha CSV");
    ev->add_option("--gt", o.gt, "Ground truth (MOT CSV or scenario .jsonl)")->required();
    ev->add_option("--pred", o.pred, "Predictions (MOT CSV)")->required();
    ev->add_option("--alphas", o.alphas, "Comma-separated overlap thresholds (default 0.05..0.95)");
    ev->add_option("--out", o.out, "Output directory (default: JSON to stdout)");

    auto* rel = app.add_subcommand("relations", "Relation-importance series as JSON lines");
    scenario_flags(rel);
    rel->add_option("--sequence", o.sequence, "Scenario JSON lines (default: generate from --scenario)");
    rel->add_option("--checkpoint", o.checkpoint, "Model checkpoint")->required();
    rel->add_option("--stride", o.stride, "Frame stride")->check(CLI::PositiveNumber);
    rel->add_option("--out", o.out, "Output file (default stdout)");

    auto* ab = app.add_subcommand("ablate", "Train and evaluate one model per distance threshold");
    scenario_flags(ab);
    model_flags(ab);
    ab->add_option("--grid", o.grid, "Comma-separated d_th values");
    ab->add_option("--eval-sequences", o.eval_sequences, "Held-out scenarios")->check(CLI::PositiveNumber);
    ab->add_option("--alphas", o.alphas, "Comma-separated overlap thresholds");
    ab->add_option("--out", o.out, "Output directory");

    auto* gc = app.add_subcommand("gradcheck", "Finite-difference check of all model gradients");
    gc->add_option("--seed", o.seed, "Random seed");
    gc->add_option("--dim", o.dim, "Relation embedding dimension F (default 8)")->check(CLI::PositiveNumber);
    gc->add_option("--epsilon", o.epsilon, "Finite-difference step");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n" << app.help();
        return 2;
    }

    try {
        if (gen->parsed()) return cmd_gen(o, out);
        if (tr->parsed()) return cmd_train(o, out);
        if (trk->parsed()) return cmd_track(o, out);
        if (ev->parsed()) return cmd_eval(o, out);
        if (rel->parsed()) return cmd_relations(o, out);
        if (ab->parsed()) return cmd_ablate(o, out);
        if (gc->parsed()) {
            if (gc->count("--dim") == 0) o.dim = 8;
            return cmd_gradcheck(o, out);
        }
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    err << app.help();
    return 2;
}

int run(int argc, char** argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run(args, std::cout, std::cerr);
}

}  // namespace remtrack::cli

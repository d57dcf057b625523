// prosim: command-line entry point.
//
//   extract -> features -> sample-triads -> serve -> export -> eval / probe-layers -> train
//
// Every command writes a run manifest (command, config, seed, input hashes,
// outputs) next to its outputs. Exit codes: 0 ok, 1 failure, 2 bad input
// (parse errors, missing data, usage).

#include "prosim/error.hpp"
#include "prosim/pipeline.hpp"
#include "prosim/study.hpp"
#include "prosim/study_server.hpp"

#include "CLI11.hpp"

#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <thread>

namespace fs = std::filesystem;
using namespace prosim;
using nlohmann::ordered_json;

namespace {

struct Globals {
  std::uint64_t seed = 17;
  int jobs = 1;
};

struct ConsensusArgs {
  std::string consensus;
  std::string triads;
  std::string judgments;
  int raters = kDefaultRatersPerTriad;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--consensus", consensus, "Consensus triads JSONL");
    cmd->add_option("--triads", triads, "Triads JSONL (with --judgments)");
    cmd->add_option("--judgments", judgments, "Judgments JSONL (with --triads)");
    cmd->add_option("--raters-per-triad", raters, "Judgments required for consensus");
  }

  std::vector<ConsensusTriad> load(RunManifest& run) const {
    if (!consensus.empty()) {
      run.add_input(consensus);
      return read_consensus(consensus);
    }
    if (triads.empty() || judgments.empty()) {
      throw Error(Errc::MissingData, "need --consensus, or --triads with --judgments");
    }
    run.add_input(triads);
    run.add_input(judgments);
    return consensus_filter(read_triads(triads), read_judgments(judgments), raters);
  }
};

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  f << text;
  if (!f) throw Error(Errc::IoError, "cannot write " + path.string());
}

Manifest load_manifest(const std::string& path, const std::string& review, RunManifest& run) {
  if (!fs::exists(path)) throw Error(Errc::MissingData, "manifest " + path);
  run.add_input(path);
  Manifest m = read_manifest(path);
  if (!review.empty()) {
    run.add_input(review);
    m = filter_approved(m, read_review_csv(review));
  }
  return m;
}

int jobs_or_hw(int jobs) {
  if (jobs > 0) return jobs;
  return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

StudyServer* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Prosodic similarity toolkit"};
  app.require_subcommand(1);
  app.set_config("--config", "", "key=value configuration file");
  Globals g;
  app.add_option("--seed", g.seed, "Seed for every randomized step")->capture_default_str();
  app.add_option("--jobs", g.jobs, "Worker threads (0 = all cores)")->capture_default_str();

  RunManifest run;
  std::function<int()> action;

  // extract
  ExtractOptions ex;
  std::string ex_alignments, ex_audio, ex_out;
  auto* c_extract = app.add_subcommand("extract", "Cut feedback clips from aligned conversations");
  c_extract->add_option("--alignments", ex_alignments, "Directory of alignment files")->required();
  c_extract->add_option("--audio", ex_audio, "Directory of <conversation>.wav files")->required();
  c_extract->add_option("--out", ex_out, "Output directory")->required();
  c_extract->add_option("--dataset", ex.dataset, "Dataset label")->capture_default_str();
  c_extract->add_option("--gap", ex.isolation_gap_s, "Isolation gap in seconds")->capture_default_str();
  c_extract->add_option("--pad", ex.pad_s, "Padding in seconds")->capture_default_str();
  c_extract->add_option("--rate", ex.target_rate, "Output sample rate")->capture_default_str();
  c_extract->callback([&] {
    action = [&] {
      ex.alignment_dir = ex_alignments;
      ex.audio_dir = ex_audio;
      ex.out_dir = ex_out;
      ex.jobs = jobs_or_hw(g.jobs);
      run.add_input(ex.alignment_dir);
      run.add_input(ex.audio_dir);
      run.config = {{"dataset", ex.dataset}, {"gap", ex.isolation_gap_s}, {"pad", ex.pad_s},
                    {"rate", ex.target_rate}};
      const ExtractSummary s = run_extract(ex);
      for (const auto& w : s.warnings) std::cerr << "warning: " << w << '\n';
      int code = 0;
      for (const auto& f : s.failures) {
        std::cerr << "error: " << f.conversation_id << ": " << f.message << '\n';
        code = std::max(code, f.code == "ParseError" ? 2 : 1);
      }
      std::cout << s.conversations << " conversations, " << s.candidates << " candidates, "
                << s.clips << " clips\n";
      run.outputs = {s.manifest_path.generic_string(), s.review_path.generic_string()};
      run.write(fs::path(ex_out) / "run_manifest.json");
      return code;
    };
  });

  // features
  std::string ft_manifest, ft_review, ft_out;
  PitchConfig pitch;
  auto* c_features = app.add_subcommand("features", "Pitch statistics and Legendre fits per clip");
  c_features->add_option("--manifest", ft_manifest, "Manifest JSONL")->required();
  c_features->add_option("--review", ft_review, "Review CSV; only approved clips are used");
  c_features->add_option("--out", ft_out, "Features JSONL")->required();
  c_features->add_option("--floor", pitch.floor_hz, "Pitch floor (Hz)")->capture_default_str();
  c_features->add_option("--ceiling", pitch.ceil_hz, "Pitch ceiling (Hz)")->capture_default_str();
  c_features->callback([&] {
    action = [&] {
      const Manifest m = load_manifest(ft_manifest, ft_review, run);
      run.config = {{"floor_hz", pitch.floor_hz}, {"ceil_hz", pitch.ceil_hz}};
      const auto rows = compute_features(m, pitch, jobs_or_hw(g.jobs));
      write_features(rows, ft_out);
      std::size_t flagged = 0;
      for (const auto& r : rows) flagged += r.reason.empty() ? 0 : 1;
      std::cout << rows.size() << " clips, " << flagged << " flagged\n";
      run.outputs = {ft_out};
      run.write(ft_out + ".run.json");
      return 0;
    };
  });

  // sample-triads
  std::string st_manifest, st_review, st_out;
  std::size_t st_count = 1200;
  auto* c_sample = app.add_subcommand("sample-triads", "Draw same-form triads per dataset");
  c_sample->add_option("--manifest", st_manifest, "Manifest JSONL")->required();
  c_sample->add_option("--review", st_review, "Review CSV; only approved clips are used");
  c_sample->add_option("--count", st_count, "Triads per dataset")->capture_default_str();
  c_sample->add_option("--out", st_out, "Triads JSONL")->required();
  c_sample->callback([&] {
    action = [&] {
      const Manifest m = load_manifest(st_manifest, st_review, run);
      run.config = {{"count", st_count}};
      const auto triads = sample_triads(m, st_count, g.seed);
      write_triads(triads, st_out);
      std::cout << triads.size() << " triads\n";
      run.outputs = {st_out};
      run.write(st_out + ".run.json");
      return 0;
    };
  });

  // serve
  std::string sv_data, sv_host = "127.0.0.1", sv_instructions;
  int sv_port = 8080;
  StudyConfig study;
  auto* c_serve = app.add_subcommand("serve", "Run the rating service");
  c_serve->add_option("--data-dir", sv_data, "Directory with manifest.jsonl and triads.jsonl")->required();
  c_serve->add_option("--port", sv_port, "Port (0 picks a free one)")->capture_default_str();
  c_serve->add_option("--host", sv_host, "Bind address")->capture_default_str();
  c_serve->add_option("--raters-per-triad", study.raters_per_triad, "Raters per triad")->capture_default_str();
  c_serve->add_option("--tasks-per-session", study.tasks_per_session, "Triads per session")->capture_default_str();
  c_serve->add_option("--instructions", sv_instructions, "Instruction text shown to raters");

  // export
  std::string xp_data, xp_out, xp_consensus;
  auto* c_export = app.add_subcommand("export", "Export accepted judgments from a study log");
  c_export->add_option("--data-dir", xp_data, "Study data directory")->required();
  c_export->add_option("--out", xp_out, "Judgments JSONL")->required();
  c_export->add_option("--consensus-out", xp_consensus, "Also write unanimous consensus triads");
  c_export->add_option("--raters-per-triad", study.raters_per_triad, "Raters per triad")->capture_default_str();

  auto open_store = [&](const std::string& data_dir) {
    const fs::path dir(data_dir);
    const auto manifest = dir / "manifest.jsonl", triads = dir / "triads.jsonl";
    if (!fs::is_directory(dir) || !fs::exists(manifest) || !fs::exists(triads)) {
      throw Error(Errc::MissingData, data_dir + " needs manifest.jsonl and triads.jsonl");
    }
    run.add_input(manifest);
    run.add_input(triads);
    study.seed = g.seed;
    if (!sv_instructions.empty()) study.instructions = sv_instructions;
    return std::make_unique<StudyStore>(read_triads(triads), read_manifest(manifest),
                                        dir / "judgments.log.jsonl", study);
  };

  c_serve->callback([&] {
    action = [&] {
      auto store = open_store(sv_data);
      StudyServer server(*store, fs::path(sv_data) / "ui");
      const int port = server.bind(sv_host, sv_port);
      run.config = {{"port", port}, {"raters_per_triad", study.raters_per_triad},
                    {"tasks_per_session", study.tasks_per_session}};
      run.outputs = {(fs::path(sv_data) / "judgments.log.jsonl").generic_string()};
      run.write(fs::path(sv_data) / "serve.run.json");
      g_server = &server;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::cout << "listening on " << sv_host << ":" << port << std::endl;
      server.run();
      g_server = nullptr;
      return 0;
    };
  });

  c_export->callback([&] {
    action = [&] {
      auto store = open_store(xp_data);
      run.add_input(fs::path(xp_data) / "judgments.log.jsonl");
      const auto judgments = store->export_judgments();
      write_judgments(judgments, xp_out);
      run.outputs = {xp_out};
      std::cout << judgments.size() << " judgments";
      if (!xp_consensus.empty()) {
        const auto consensus = consensus_filter(read_triads(fs::path(xp_data) / "triads.jsonl"),
                                                judgments, study.raters_per_triad);
        write_consensus(consensus, xp_consensus);
        run.outputs.push_back(xp_consensus);
        std::cout << ", " << consensus.size() << " consensus triads";
      }
      std::cout << '\n';
      run.write(xp_out + ".run.json");
      return 0;
    };
  });

  // eval
  ConsensusArgs ev_in;
  std::string ev_features, ev_manifest, ev_out;
  EvalOptions ev;
  bool ev_no_spectral = false, ev_probe = false;
  auto* c_eval = app.add_subcommand("eval", "Agreement of each representation with consensus");
  ev_in.add_to(c_eval);
  c_eval->add_option("--features", ev_features, "Features JSONL")->required();
  c_eval->add_option("--manifest", ev_manifest, "Manifest JSONL")->required();
  c_eval->add_option("--out-dir", ev_out, "Report directory")->required();
  c_eval->add_option("--models", ev.models, "Embedding models (default: all in manifest)");
  c_eval->add_flag("--no-spectral", ev_no_spectral, "Skip the spectrogram rows");
  c_eval->add_flag("--oracle", ev.oracle_row, "Add a consensus-oracle row");
  c_eval->add_flag("--random", ev.random_row, "Add a seeded random-score row");
  c_eval->add_flag("--probe", ev_probe, "Write per-layer curves for embedding models");
  c_eval->callback([&] {
    action = [&] {
      const auto consensus = ev_in.load(run);
      run.add_input(ev_features);
      const Manifest m = load_manifest(ev_manifest, "", run);
      ev.spectral_rows = !ev_no_spectral;
      ev.seed = g.seed;
      ev.jobs = jobs_or_hw(g.jobs);
      run.config = {{"spectral", ev.spectral_rows}, {"oracle", ev.oracle_row},
                    {"random", ev.random_row}, {"models", ev.models}, {"probe", ev_probe}};
      const EvalResult r = run_eval(consensus, read_features(ev_features), m, ev);
      const RenderedReport rendered = emit_table(r.report);
      const fs::path dir(ev_out);
      write_text(dir / "report.csv", rendered.csv);
      write_text(dir / "report.txt", rendered.text);
      write_text(dir / "report.json", to_json(r.report).dump(1) + "\n");
      run.outputs = {(dir / "report.csv").generic_string(), (dir / "report.txt").generic_string(),
                     (dir / "report.json").generic_string()};
      if (ev_probe && !r.curves.empty()) {
        write_text(dir / "layers.csv", layer_curves_csv(r.curves));
        run.outputs.push_back((dir / "layers.csv").generic_string());
      }
      std::cout << rendered.text;
      run.write(dir / "run_manifest.json");
      return 0;
    };
  });

  // probe-layers
  ConsensusArgs pl_in;
  std::string pl_manifest, pl_model, pl_out;
  auto* c_probe = app.add_subcommand("probe-layers", "Per-layer agreement of one embedding model");
  pl_in.add_to(c_probe);
  c_probe->add_option("--manifest", pl_manifest, "Manifest JSONL")->required();
  c_probe->add_option("--model", pl_model, "Embedding model name")->required();
  c_probe->add_option("--out", pl_out, "Layer curve CSV")->required();
  c_probe->callback([&] {
    action = [&] {
      const auto consensus = pl_in.load(run);
      const Manifest m = load_manifest(pl_manifest, "", run);
      run.config = {{"model", pl_model}};
      std::map<std::string, std::vector<ConsensusTriad>> by_dataset;
      for (const auto& t : consensus) by_dataset[t.triad.dataset].push_back(t);
      const StackSet stacks = load_stacks(m, pl_model);
      std::vector<LayerCurve> curves;
      for (const auto& [ds, triads] : by_dataset) {
        curves.push_back({pl_model, ds, probe_layers(triads, stacks, pl_model)});
      }
      const std::string csv = layer_curves_csv(curves);
      write_text(pl_out, csv);
      std::cout << csv;
      run.outputs = {pl_out};
      run.write(pl_out + ".run.json");
      return 0;
    };
  });

  // train
  ConsensusArgs tr_in;
  std::string tr_features, tr_manifest, tr_out, tr_input = "lp3+voiced_len";
  TrainConfig tc;
  std::vector<int> tr_dims;
  bool tr_strict_dims = false;
  auto* c_train = app.add_subcommand("train", "Triplet-loss projections with cross-validation");
  tr_in.add_to(c_train);
  c_train->add_option("--features", tr_features, "Features JSONL (lp3 inputs)");
  c_train->add_option("--manifest", tr_manifest, "Manifest JSONL (embedding inputs)");
  c_train->add_option("--input", tr_input, "lp3 | lp3+voiced_len | embedding:<model>:<layer>")->capture_default_str();
  c_train->add_option("--dims", tr_dims, "Latent sizes (default depends on input)");
  c_train->add_option("--folds", tc.folds, "Cross-validation folds")->capture_default_str();
  c_train->add_option("--holdout", tc.holdout_frac, "Holdout fraction")->capture_default_str();
  c_train->add_option("--epochs", tc.epochs, "Epoch budget")->capture_default_str();
  c_train->add_option("--batch", tc.batch_size, "Batch size")->capture_default_str();
  c_train->add_option("--lr", tc.learning_rate, "Learning rate")->capture_default_str();
  c_train->add_option("--margin", tc.margin, "Triplet margin")->capture_default_str();
  c_train->add_option("--patience", tc.patience, "Early-stopping patience (epochs)")->capture_default_str();
  c_train->add_flag("--strict-dims", tr_strict_dims, "Skip latent sizes above the input size");
  c_train->add_option("--out", tr_out, "Output directory")->required();
  c_train->callback([&] {
    action = [&] {
      tc.input = InputSpec::parse(tr_input);
      tc.latent_dims = tr_dims.empty() ? default_latent_dims(tc.input.kind) : tr_dims;
      tc.allow_rank_deficient = !tr_strict_dims;
      tc.seed = g.seed;
      tc.jobs = jobs_or_hw(g.jobs);
      const auto consensus = tr_in.load(run);
      FeatureMap features;
      Manifest m;
      if (!tr_features.empty()) {
        run.add_input(tr_features);
        features = read_features(tr_features);
      }
      if (!tr_manifest.empty()) m = load_manifest(tr_manifest, "", run);
      if (tc.input.kind == InputKind::EmbeddingLayer && tr_manifest.empty()) {
        throw Error(Errc::MissingData, "embedding input needs --manifest");
      }
      if (tc.input.kind != InputKind::EmbeddingLayer && tr_features.empty()) {
        throw Error(Errc::MissingData, "lp inputs need --features");
      }
      const FeatureTable table = build_input_table(tc.input, features, m);
      run.config = {{"input", tc.input.label()}, {"latent_dims", tc.latent_dims},
                    {"folds", tc.folds},         {"holdout", tc.holdout_frac},
                    {"epochs", tc.epochs},       {"batch", tc.batch_size},
                    {"lr", tc.learning_rate},    {"margin", tc.margin},
                    {"patience", tc.patience},   {"allow_rank_deficient", tc.allow_rank_deficient}};
      const TrainOutputs out = run_train(consensus, table, tc, tr_out);
      std::cout << "raw holdout agreement " << format_percent(out.result.raw_holdout.percent) << "\n"
                << sweep_csv(out.result.reports);
      for (const auto& f : out.files) run.outputs.push_back(f.generic_string());
      run.write(fs::path(tr_out) / "run_manifest.json");
      return 0;
    };
  });

  // report
  std::vector<std::string> rp_in;
  std::string rp_out;
  auto* c_report = app.add_subcommand("report", "Merge saved reports into one table");
  c_report->add_option("--in", rp_in, "report.json files")->required();
  c_report->add_option("--out-dir", rp_out, "Output directory")->required();
  c_report->callback([&] {
    action = [&] {
      AgreementReport merged;
      for (const auto& p : rp_in) {
        run.add_input(p);
        std::ifstream f(p);
        if (!f) throw Error(Errc::MissingData, "report " + p);
        const AgreementReport r = report_from_json(nlohmann::json::parse(f));
        for (const auto& row : r.rows) {
          for (const auto& [ds, cell] : row.by_dataset) merged.set(row.metric, ds, cell);
        }
      }
      const RenderedReport rendered = emit_table(merged);
      const fs::path dir(rp_out);
      write_text(dir / "report.csv", rendered.csv);
      write_text(dir / "report.txt", rendered.text);
      std::cout << rendered.text;
      run.outputs = {(dir / "report.csv").generic_string(), (dir / "report.txt").generic_string()};
      run.write(dir / "run_manifest.json");
      return 0;
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  run.command = app.get_subcommands().front()->get_name();
  run.seed = g.seed;
  try {
    return action();
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.code() == Errc::ParseError || e.code() == Errc::MissingData ? 2 : 1;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: ParseError: " << e.what() << '\n';
    return 2;
  }
}

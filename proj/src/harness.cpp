#include "eostb/harness.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include "eostb/checkpoint.hpp"
#include "eostb/errors.hpp"
#include "eostb/plots.hpp"
#include "eostb/probes.hpp"
#include "eostb/scoring.hpp"

namespace eostb {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

ojson Provenance::to_json() const {
  return {{"config_hash", config_hash}, {"seed", seed}, {"code_version", code_version}, {"kind", kind}};
}

Provenance provenance_for(const RunConfig& cfg, std::uint64_t seed) {
  return {config_hash(cfg), seed, code_version(), std::string(to_string(cfg.kind))};
}

std::string seed_dir(const RunConfig& cfg, std::uint64_t seed) {
  return (fs::path(cfg.output_dir) / ("seed-" + std::to_string(seed))).string();
}

namespace {

void write_file(const std::string& path, const std::string& body) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path + "' for writing");
  f << body;
  if (!f) throw IoError("write failed for '" + path + "'");
}

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void make_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory '" + dir + "': " + ec.message());
}

std::string path_in(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

// Stamps a JSON report with provenance and writes it.
void write_report(const std::string& path, ojson body, const Provenance& prov) {
  ojson j;
  j["provenance"] = prov.to_json();
  for (auto it = body.begin(); it != body.end(); ++it) j[it.key()] = it.value();
  write_file(path, j.dump(2) + "\n");
}

Params load_params(const RunConfig& cfg, std::uint64_t seed) {
  if (cfg.init_checkpoint.empty()) throw ConfigError(std::string(to_string(cfg.kind)) + ": init_checkpoint is required");
  Checkpoint ck = read_checkpoint(expand_seed(cfg.init_checkpoint, seed));
  if (!(ck.params.config == cfg.model))
    throw ConfigError("checkpoint model config does not match the run's model section");
  return std::move(ck.params);
}

ObjectiveSpec objective_for(const RunConfig& cfg) {
  ObjectiveSpec spec = cfg.objective;
  switch (cfg.kind) {
    case RunKind::train_mle: spec.kind = ObjectiveKind::mle; break;
    case RunKind::train_selective: spec.kind = ObjectiveKind::selective; break;
    case RunKind::train_combined: spec.kind = ObjectiveKind::combined; break;
    default: break;
  }
  return spec;
}

void run_dataset_build(const RunConfig& cfg, std::ostream& log) {
  make_dir(cfg.output_dir);
  const auto train = build_dataset(cfg.dataset, Split::train);
  const auto test = build_dataset(cfg.dataset, Split::test);
  write_dataset(path_in(cfg.output_dir, "train.jsonl"), train);
  write_dataset(path_in(cfg.output_dir, "test.jsonl"), test);
  Provenance prov = provenance_for(cfg, 0);
  write_report(path_in(cfg.output_dir, "dataset.json"),
               {{"dataset", to_json(cfg.dataset)}, {"train_examples", train.size()}, {"test_examples", test.size()}},
               prov);
  log << "dataset: " << train.size() << " train / " << test.size() << " test examples -> " << cfg.output_dir << "\n";
}

void run_train(const RunConfig& cfg, std::uint64_t seed, const std::string& dir, std::ostream& log) {
  const Vocab vocab = cfg.dataset.vocab();
  const auto data = load_split(cfg, Split::train, seed);
  const auto monitor = monitor_batch(data, cfg.training.monitor_detail, cfg.training.monitor_size);

  Params init;
  AdamState resume;
  if (cfg.kind == RunKind::further_train || !cfg.init_checkpoint.empty()) {
    Checkpoint ck = read_checkpoint(expand_seed(cfg.init_checkpoint, seed));
    if (!(ck.params.config == cfg.model))
      throw ConfigError("checkpoint model config does not match the run's model section");
    init = std::move(ck.params);
    if (cfg.training.resume_optimizer) resume = std::move(ck.optimizer);
  } else {
    init = init_params(cfg.model, seed);
  }

  TrainConfig tc = cfg.training.train;
  tc.objective = objective_for(cfg);
  tc.seed = seed;
  const TrainResult r = train(std::move(init), data, tc, monitor, vocab, resume);

  const Provenance prov = provenance_for(cfg, seed);
  Checkpoint ck;
  ck.params = r.params;
  ck.optimizer = r.optimizer;
  ck.meta = {{"provenance", prov.to_json()}, {"config", to_json(cfg)}, {"steps", r.log.steps.size()}};
  write_checkpoint(path_in(dir, "model.ckpt"), ck);
  write_file(path_in(dir, "training_log.tsv"), training_log_tsv(r.log));
  write_file(path_in(dir, "eos_track.tsv"), eos_track_tsv(r.log));

  Series loss{"loss", {}, {}};
  for (const auto& s : r.log.steps) {
    loss.x.push_back(static_cast<double>(s.step));
    loss.y.push_back(s.loss);
  }
  write_plot(path_in(dir, "loss"), line_plot_svg("training loss", "step", "loss", {loss}), series_tsv({loss}));
  Series ll{"eos_loglik", {}, {}}, pe{"p_eos_sentence_end", {}, {}};
  for (const auto& t : r.log.tracks) {
    ll.x.push_back(static_cast<double>(t.step));
    ll.y.push_back(t.value.eos_loglik);
    pe.x.push_back(static_cast<double>(t.step));
    pe.y.push_back(t.value.p_eos_sentence_end);
  }
  write_plot(path_in(dir, "eos_loglik"),
             line_plot_svg("mean log p(EOS) at EOS labels", "step", "log-likelihood", {ll}), series_tsv({ll}));
  write_plot(path_in(dir, "eos_sentence_end"),
             line_plot_svg("mean p(EOS) after a period", "step", "probability", {pe}), series_tsv({pe}));

  ojson summary = {{"objective", std::string(to_string(tc.objective.kind))},
                   {"train_examples", data.size()},
                   {"steps", r.log.steps.size()},
                   {"final_loss", r.log.steps.empty() ? 0.0 : r.log.steps.back().loss}};
  if (!r.log.tracks.empty()) {
    summary["eos_loglik_start"] = r.log.tracks.front().value.eos_loglik;
    summary["eos_loglik_end"] = r.log.tracks.back().value.eos_loglik;
    summary["p_eos_sentence_end_start"] = r.log.tracks.front().value.p_eos_sentence_end;
    summary["p_eos_sentence_end_end"] = r.log.tracks.back().value.p_eos_sentence_end;
  }
  write_report(path_in(dir, "train.json"), summary, prov);
  log << "seed " << seed << ": " << r.log.steps.size() << " steps, final loss " << num(summary["final_loss"].get<double>())
      << " -> " << dir << "\n";
}

void run_score(const RunConfig& cfg, std::uint64_t seed, const std::string& dir, std::ostream& log) {
  const Vocab vocab = cfg.dataset.vocab();
  const Params ref = load_params(cfg, seed);
  const auto data = load_split(cfg, Split::train, seed);
  const auto scores = score_dataset(ref, data, vocab.eos());
  write_score_report(path_in(dir, "scores.tsv"), scores);

  const ScoreSummary s = summarize_scores(scores);
  std::vector<Series> hist;
  for (const auto& [name, h] : {std::pair{"s_pos", &s.pos}, std::pair{"s_neg", &s.neg}, std::pair{"s_final", &s.fin}}) {
    Series ser{name, {}, {}};
    for (std::size_t b = 0; b < h->counts.size(); ++b) {
      ser.x.push_back(h->lo + h->bin_width() * (static_cast<double>(b) + 0.5));
      ser.y.push_back(h->counts[b]);
    }
    hist.push_back(std::move(ser));
  }
  write_plot(path_in(dir, "score_hist"), line_plot_svg("score distributions", "score", "examples", hist),
             series_tsv(hist));
  write_report(path_in(dir, "score.json"),
               {{"examples", scores.size()},
                {"mean_s_pos", s.mean_pos},
                {"mean_s_neg", s.mean_neg},
                {"mean_s_final", s.mean_final},
                {"sd_s_final", s.sd_final}},
               provenance_for(cfg, seed));
  log << "seed " << seed << ": scored " << scores.size() << " examples, mean s_final " << num(s.mean_final) << "\n";
}

void run_filter(const RunConfig& cfg, std::uint64_t seed, const std::string& dir, std::ostream& log) {
  const auto data = load_split(cfg, Split::train, seed);
  std::vector<ScoreTriple> scores;
  if (!cfg.filter.scores.empty())
    scores = read_score_report(expand_seed(cfg.filter.scores, seed));
  else
    scores = score_dataset(load_params(cfg, seed), data, cfg.dataset.vocab().eos());
  FilterPlan plan = cfg.filter.plan;
  const FilterOutcome out = filter_dataset(data, scores, plan);
  write_dataset(path_in(dir, "filtered.jsonl"), out.kept);
  auto manifest = nlohmann::json::parse(filter_manifest_json(plan, out.removed, data.size()));
  ojson body;
  for (auto it = manifest.begin(); it != manifest.end(); ++it) body[it.key()] = it.value();
  write_report(path_in(dir, "filter_manifest.json"), body, provenance_for(cfg, seed));
  log << "seed " << seed << ": kept " << out.kept.size() << " of " << data.size() << " (" << to_string(plan.mode)
      << ")\n";
}

ojson eval_json(const EvalReport& r) {
  return {{"chair_s", r.chair_s},
          {"chair_i", r.chair_i},
          {"recall", r.recall},
          {"mean_length", r.mean_length},
          {"n_captions", r.n_captions},
          {"avg_correct_mentions", r.avg_correct_mentions},
          {"avg_halluc_mentions", r.avg_halluc_mentions}};
}

void run_eval(const RunConfig& cfg, std::uint64_t seed, const std::string& dir, std::ostream& log) {
  const Vocab vocab = cfg.dataset.vocab();
  const Params params = load_params(cfg, seed);
  const auto test = load_split(cfg, Split::test, seed);
  const auto caps = generate_captions(params, test, vocab, cfg.decode);
  const auto scenes = scenes_of(test);
  write_captions(path_in(dir, "captions.tsv"), caps, vocab);

  const EvalReport rep = chair_eval(caps, scenes, vocab);
  ojson body = {{"decode", {{"max_len", cfg.decode.max_len}, {"alpha", cfg.decode.alpha}}},
                {"checkpoint", expand_seed(cfg.init_checkpoint, seed)},
                {"metrics", eval_json(rep)}};
  std::string table = "variant\tchair_s\tchair_i\trecall\tmean_length\tn_captions\n";
  auto row = [&](const std::string& name, const EvalReport& r) {
    table += name + "\t" + num(r.chair_s) + "\t" + num(r.chair_i) + "\t" + num(r.recall) + "\t" + num(r.mean_length) +
             "\t" + std::to_string(r.n_captions) + "\n";
  };
  row("greedy", rep);
  ojson trunc = ojson::array();
  for (double r : cfg.eval.truncate_r) {
    const EvalReport t = chair_eval(truncate_baseline(caps, r, vocab), scenes, vocab);
    row("truncate_" + num(r), t);
    trunc.push_back({{"r", r}, {"metrics", eval_json(t)}});
  }
  body["truncation"] = trunc;
  if (!cfg.eval.base_captions.empty()) {
    const auto base = read_captions(expand_seed(cfg.eval.base_captions, seed));
    const OmissionReport o = omission_analysis(base, caps, scenes, vocab);
    body["omission"] = {{"n_halluc_omitted", o.n_halluc_omitted},
                        {"n_correct_omitted", o.n_correct_omitted},
                        {"halluc_rate_of_omission", o.halluc_rate_of_omission},
                        {"avg_correct_per_caption", o.avg_correct_per_caption},
                        {"avg_halluc_per_caption", o.avg_halluc_per_caption}};
  }
  write_file(path_in(dir, "eval.tsv"), table);
  write_report(path_in(dir, "eval.json"), body, provenance_for(cfg, seed));
  log << "seed " << seed << ": chair_s " << num(rep.chair_s) << " chair_i " << num(rep.chair_i) << " recall "
      << num(rep.recall) << " len " << num(rep.mean_length) << "\n";
}

void run_probe_saliency(const RunConfig& cfg, std::uint64_t seed, const std::string& dir, std::ostream& log) {
  const Vocab vocab = cfg.dataset.vocab();
  const Params params = load_params(cfg, seed);
  const auto test = load_split(cfg, Split::test, seed);
  const FlowSummary f = flow_probe(params, test, cfg.probe.examples, cfg.probe.target_seed, vocab);

  std::string tsv = "layer\ttarget\tscene\tprev\tcurrent\n";
  ojson layers = ojson::array();
  std::vector<std::string> cats;
  BarGroup eos{"EOS target", {}}, other{"non-EOS target", {}};
  for (std::size_t l = 0; l < f.eos_target.size(); ++l) {
    const auto& a = f.eos_target[l];
    const auto& b = f.non_eos_target[l];
    tsv += std::to_string(l) + "\teos\t" + num(a.scene) + "\t" + num(a.prev) + "\t" + num(a.current) + "\n";
    tsv += std::to_string(l) + "\tnon_eos\t" + num(b.scene) + "\t" + num(b.prev) + "\t" + num(b.current) + "\n";
    layers.push_back({{"layer", l},
                      {"eos", {{"scene", a.scene}, {"prev", a.prev}, {"current", a.current}}},
                      {"non_eos", {{"scene", b.scene}, {"prev", b.prev}, {"current", b.current}}}});
    cats.push_back("layer " + std::to_string(l));
    eos.values.push_back(a.prev);
    other.values.push_back(b.prev);
  }
  write_file(path_in(dir, "flow.tsv"), tsv);
  write_plot(path_in(dir, "flow_prev"), bar_plot_svg("flow from previous sentences", cats, {eos, other}),
             bars_tsv(cats, {eos, other}));
  write_report(path_in(dir, "flow.json"),
               {{"examples", f.n_examples},
                {"layers", layers},
                {"top_quartile_prev_eos", f.top_quartile_prev_eos},
                {"top_quartile_prev_non_eos", f.top_quartile_prev_non_eos}},
               provenance_for(cfg, seed));
  log << "seed " << seed << ": prev-sentence flow (top quartile) EOS " << num(f.top_quartile_prev_eos) << " vs non-EOS "
      << num(f.top_quartile_prev_non_eos) << " over " << f.n_examples << " examples\n";
}

void run_probe_aggregation(const RunConfig& cfg, std::uint64_t seed, const std::string& dir, std::ostream& log) {
  const Vocab vocab = cfg.dataset.vocab();
  const Params params = load_params(cfg, seed);
  const auto test = load_split(cfg, Split::test, seed);
  const AggregationSummary s = aggregation_probe(params, test, cfg.probe.examples, vocab);
  std::string tsv = "layer\tothers_to_periods\tperiods_to_target\tamong_others\n";
  std::vector<Series> series{{"others->periods", {}, {}}, {"periods->target", {}, {}}, {"among others", {}, {}}};
  ojson layers = ojson::array();
  for (std::size_t l = 0; l < s.layers.size(); ++l) {
    const auto& a = s.layers[l];
    tsv += std::to_string(l) + "\t" + num(a.others_to_periods) + "\t" + num(a.periods_to_target) + "\t" +
           num(a.among_others) + "\n";
    const double x = static_cast<double>(l);
    series[0].x.push_back(x);
    series[0].y.push_back(a.others_to_periods);
    series[1].x.push_back(x);
    series[1].y.push_back(a.periods_to_target);
    series[2].x.push_back(x);
    series[2].y.push_back(a.among_others);
    layers.push_back({{"layer", l},
                      {"others_to_periods", a.others_to_periods},
                      {"periods_to_target", a.periods_to_target},
                      {"among_others", a.among_others}});
  }
  write_file(path_in(dir, "aggregation.tsv"), tsv);
  write_plot(path_in(dir, "aggregation"), line_plot_svg("information aggregation", "layer", "proportion", series),
             series_tsv(series));
  write_report(path_in(dir, "aggregation.json"), {{"examples", s.n_examples}, {"layers", layers}},
               provenance_for(cfg, seed));
  log << "seed " << seed << ": aggregation over " << s.n_examples << " examples\n";
}

void run_probe_tendency(const RunConfig& cfg, std::uint64_t seed, const std::string& dir, std::ostream& log) {
  const Params params = load_params(cfg, seed);
  auto test = load_split(cfg, Split::test, seed);
  if (static_cast<int>(test.size()) > cfg.probe.examples) test.resize(cfg.probe.examples);
  std::vector<Series> series;
  ojson curves = ojson::array();
  std::string tsv = "mode\tbucket\tcenter\tmean_p_eos\tcount\n";
  for (ManipulationMode mode : cfg.probe.modes) {
    Manipulation m = cfg.probe.manipulation;
    m.mode = mode;
    if (mode != ManipulationMode::text_minus) m.mask_prefix_len.reset();
    const TendencyCurve c = tendency_curve(params, test, m, cfg.dataset);
    const std::string name(to_string(mode));
    series.push_back({name, c.center, c.mean});
    for (int b = 0; b < TendencyCurve::kBuckets; ++b)
      tsv += name + "\t" + std::to_string(b) + "\t" + num(c.center[b]) + "\t" + num(c.mean[b]) + "\t" +
             std::to_string(c.count[b]) + "\n";
    ojson means = ojson::array();
    for (double v : c.mean) means.push_back(std::isfinite(v) ? ojson(v) : ojson(nullptr));
    curves.push_back({{"mode", name},
                      {"center", c.center},
                      {"mean", means},
                      {"count", c.count},
                      {"fit", {{"a", c.fit_a}, {"b", c.fit_b}, {"rms_residual", c.fit_rms}}}});
  }
  write_file(path_in(dir, "tendency.tsv"), tsv);
  write_plot(path_in(dir, "tendency"),
             line_plot_svg("p(EOS) after a period vs relative position", "relative position i/N", "mean p(EOS)", series),
             series_tsv(series));
  write_report(path_in(dir, "tendency.json"), {{"examples", test.size()}, {"curves", curves}},
               provenance_for(cfg, seed));
  log << "seed " << seed << ": tendency curves for " << series.size() << " context variants\n";
}

void run_report(const RunConfig& cfg, std::ostream& log) {
  make_dir(cfg.output_dir);
  std::string tsv = "run\tseed\tchair_s\tchair_i\trecall\tmean_length\n";
  std::string md = "| run | seed | CHAIR_S | CHAIR_I | recall | mean length |\n|---|---|---|---|---|---|\n";
  std::vector<std::string> cats;
  BarGroup cs{"CHAIR_S", {}}, ci{"CHAIR_I", {}}, rc{"recall", {}};
  for (const auto& run_dir : cfg.report_runs) {
    for (std::uint64_t seed : cfg.seeds) {
      const std::string path = path_in(path_in(run_dir, "seed-" + std::to_string(seed)), "eval.json");
      if (!fs::exists(path)) throw IoError("report: missing '" + path + "'");
      const auto j = nlohmann::json::parse(read_file(path));
      const auto& m = j.at("metrics");
      const std::string name = fs::path(run_dir).filename().string();
      const double a = m.at("chair_s"), b = m.at("chair_i"), r = m.at("recall"), len = m.at("mean_length");
      tsv += name + "\t" + std::to_string(seed) + "\t" + num(a) + "\t" + num(b) + "\t" + num(r) + "\t" + num(len) + "\n";
      char buf[200];
      std::snprintf(buf, sizeof buf, "| %s | %llu | %.3f | %.3f | %.3f | %.2f |\n", name.c_str(),
                    static_cast<unsigned long long>(seed), a, b, r, len);
      md += buf;
      cats.push_back(name + "/" + std::to_string(seed));
      cs.values.push_back(a);
      ci.values.push_back(b);
      rc.values.push_back(r);
    }
  }
  write_file(path_in(cfg.output_dir, "report.tsv"), tsv);
  write_file(path_in(cfg.output_dir, "report.md"), md);
  write_file(path_in(cfg.output_dir, "provenance.json"), provenance_for(cfg, 0).to_json().dump(2) + "\n");
  write_plot(path_in(cfg.output_dir, "report"), bar_plot_svg("hallucination and recall", cats, {cs, ci, rc}),
             bars_tsv(cats, {cs, ci, rc}));
  log << "report: " << cats.size() << " rows -> " << cfg.output_dir << "\n";
}

// Input paths must exist before any work starts.
void check_inputs(const RunConfig& cfg) {
  auto need = [&](const std::string& templ, const char* what) {
    if (templ.empty()) return;
    for (std::uint64_t seed : cfg.seeds) {
      const std::string p = expand_seed(templ, seed);
      if (!fs::exists(p)) throw IoError(std::string(what) + " '" + p + "' does not exist");
    }
  };
  need(cfg.train_data, "train_data");
  need(cfg.test_data, "test_data");
  need(cfg.init_checkpoint, "init_checkpoint");
  need(cfg.filter.scores, "filter.scores");
  need(cfg.eval.base_captions, "eval.base_captions");
  for (const auto& r : cfg.report_runs)
    if (!fs::is_directory(r)) throw IoError("report run '" + r + "' is not a directory");
}

}  // namespace

std::vector<Example> load_split(const RunConfig& cfg, Split split, std::uint64_t seed) {
  const std::string& path = split == Split::train ? cfg.train_data : cfg.test_data;
  if (path.empty()) return build_dataset(cfg.dataset, split);
  return read_dataset(expand_seed(path, seed), cfg.dataset.perception);
}

std::vector<Example> monitor_batch(const std::vector<Example>& data, DetailLevel level, int n) {
  std::vector<Example> out;
  for (const auto& ex : data) {
    if (static_cast<int>(out.size()) >= n) break;
    if (ex.detail_level == level) out.push_back(ex);
  }
  if (out.empty())
    for (const auto& ex : data) {
      if (static_cast<int>(out.size()) >= n) break;
      out.push_back(ex);
    }
  return out;
}

std::vector<std::vector<int>> generate_captions(const Params& params, const std::vector<Example>& data,
                                                const Vocab& vocab, const DecodeConfig& dcfg) {
  const int n = static_cast<int>(data.size());
  std::vector<std::vector<int>> out(data.size());
#pragma omp parallel for schedule(dynamic, 4)
  for (int i = 0; i < n; ++i) out[i] = generate(params, data[i].features.tokens, vocab.bos(), vocab.eos(), dcfg);
  return out;
}

std::vector<Scene> scenes_of(const std::vector<Example>& data) {
  std::vector<Scene> out;
  out.reserve(data.size());
  for (const auto& ex : data) out.push_back(ex.scene);
  return out;
}

void write_captions(const std::string& path, const std::vector<std::vector<int>>& caps, const Vocab& vocab) {
  std::string out = "index\ttokens\ttext\n";
  for (std::size_t i = 0; i < caps.size(); ++i) {
    out += std::to_string(i) + "\t";
    for (std::size_t k = 0; k < caps[i].size(); ++k) out += (k ? " " : "") + std::to_string(caps[i][k]);
    out += "\t" + vocab.decode(caps[i]) + "\n";
  }
  write_file(path, out);
}

std::vector<std::vector<int>> read_captions(const std::string& path) {
  std::istringstream in(read_file(path));
  std::string line;
  std::getline(in, line);
  if (line != "index\ttokens\ttext") throw FormatError("captions: bad header in '" + path + "'");
  std::vector<std::vector<int>> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto t1 = line.find('\t'), t2 = line.find('\t', t1 + 1);
    if (t1 == std::string::npos || t2 == std::string::npos) throw FormatError("captions: malformed row");
    std::istringstream ids(line.substr(t1 + 1, t2 - t1 - 1));
    std::vector<int> cap;
    for (int v; ids >> v;) cap.push_back(v);
    out.push_back(std::move(cap));
  }
  return out;
}

std::string training_log_tsv(const TrainingLog& log) {
  std::string out = "step\tloss\n";
  for (const auto& s : log.steps) out += std::to_string(s.step) + "\t" + num(s.loss) + "\n";
  return out;
}

std::string eos_track_tsv(const TrainingLog& log) {
  std::string out = "step\teos_loglik\tp_eos_sentence_end\n";
  for (const auto& t : log.tracks)
    out += std::to_string(t.step) + "\t" + num(t.value.eos_loglik) + "\t" + num(t.value.p_eos_sentence_end) + "\n";
  return out;
}

void run(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  check_inputs(cfg);
  if (cfg.kind == RunKind::dataset_build) return run_dataset_build(cfg, log);
  if (cfg.kind == RunKind::report) return run_report(cfg, log);
  for (std::uint64_t seed : cfg.seeds) {
    const std::string dir = seed_dir(cfg, seed);
    make_dir(dir);
    write_file(path_in(dir, "config.json"), to_json(cfg).dump(2) + "\n");
    write_file(path_in(dir, "provenance.json"), provenance_for(cfg, seed).to_json().dump(2) + "\n");
    switch (cfg.kind) {
      case RunKind::train_mle:
      case RunKind::train_selective:
      case RunKind::train_combined:
      case RunKind::further_train: run_train(cfg, seed, dir, log); break;
      case RunKind::score: run_score(cfg, seed, dir, log); break;
      case RunKind::filter: run_filter(cfg, seed, dir, log); break;
      case RunKind::eval: run_eval(cfg, seed, dir, log); break;
      case RunKind::probe_saliency: run_probe_saliency(cfg, seed, dir, log); break;
      case RunKind::probe_aggregation: run_probe_aggregation(cfg, seed, dir, log); break;
      case RunKind::probe_tendency: run_probe_tendency(cfg, seed, dir, log); break;
      case RunKind::dataset_build:
      case RunKind::report: break;
    }
  }
}

}  // namespace eostb

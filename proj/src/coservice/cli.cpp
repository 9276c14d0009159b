#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "mrin/coservice.hpp"

namespace mrin {
namespace {

using json = nlohmann::ordered_json;

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void only_keys(const json& j, const std::string& where, std::initializer_list<const char*> keys) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (auto k : keys) known = known || it.key() == k;
    if (!known) throw ConfigError("unknown config key '" + where + it.key() + "'");
  }
}

template <typename T>
T get(const json& j, const char* key, const std::string& where) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config key '" + where + key + "' has the wrong type");
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoFailure("cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoFailure("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw IoFailure("write failed for " + path.string());
}

std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

RunConfig config_or_default(const std::optional<std::filesystem::path>& path) {
  return path ? load_run_config(*path) : RunConfig{};
}

std::vector<Session> load_corpus(const std::filesystem::path& path) {
  try {
    return load_sessions(path);
  } catch (const IoFailure& e) {
    throw DataError(e.what());
  } catch (const SchemaViolation& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

// Maps the failure families onto exit codes; anything else is a data error.
template <typename Fn>
int guarded(std::ostream& err, Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const NumericFailure& e) {
    err << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const BadParams& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  }
}

}  // namespace

RunConfig parse_run_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  only_keys(j, "", {"width", "height", "leaky_slope", "adam", "seed", "epochs", "convs",
                    "divergence_factor", "slice_norm", "layer", "suggest", "eval"});
  RunConfig c;
  auto& net = c.train.net;
  if (j.contains("width")) {
    net.width = get<int>(j, "width", "");
    c.width_given = true;
  }
  if (j.contains("height")) {
    net.height = get<int>(j, "height", "");
    c.height_given = true;
  }
  if (j.contains("leaky_slope")) net.leaky_slope = get<double>(j, "leaky_slope", "");
  if (j.contains("seed")) net.seed = get<std::uint64_t>(j, "seed", "");
  if (j.contains("epochs")) c.train.epochs = get<int>(j, "epochs", "");
  if (j.contains("divergence_factor")) {
    c.train.divergence_factor = get<double>(j, "divergence_factor", "");
  }
  if (j.contains("adam")) {
    const auto& a = j["adam"];
    only_keys(a, "adam.", {"lr", "beta1", "beta2", "epsilon"});
    if (a.contains("lr")) net.adam.lr = get<double>(a, "lr", "adam.");
    if (a.contains("beta1")) net.adam.beta1 = get<double>(a, "beta1", "adam.");
    if (a.contains("beta2")) net.adam.beta2 = get<double>(a, "beta2", "adam.");
    if (a.contains("epsilon")) net.adam.epsilon = get<double>(a, "epsilon", "adam.");
  }
  if (j.contains("convs")) {
    const auto& cv = j["convs"];
    if (!cv.is_array() || cv.size() != kConvLayers) throw ConfigError("'convs' must list three layers");
    for (int l = 0; l < kConvLayers; ++l) {
      only_keys(cv[l], "convs[].", {"filters", "kernel"});
      net.convs[l] = {get<int>(cv[l], "filters", "convs[]."), get<int>(cv[l], "kernel", "convs[].")};
    }
  }
  if (j.contains("slice_norm")) {
    try {
      c.norm = parse_slice_norm(get<std::string>(j, "slice_norm", ""));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }
  if (j.contains("layer")) c.layer = get<int>(j, "layer", "");
  if (j.contains("suggest")) {
    const auto& s = j["suggest"];
    only_keys(s, "suggest.", {"threshold", "top_k"});
    if (s.contains("threshold")) c.suggest.threshold = get<double>(s, "threshold", "suggest.");
    if (s.contains("top_k")) c.suggest.top_k = get<int>(s, "top_k", "suggest.");
  }
  if (j.contains("eval")) {
    const auto& e = j["eval"];
    only_keys(e, "eval.", {"n_random", "min_added", "win_rule"});
    if (e.contains("n_random")) c.n_random = get<std::size_t>(e, "n_random", "eval.");
    if (e.contains("min_added")) c.min_added = get<int>(e, "min_added", "eval.");
    if (e.contains("win_rule")) {
      const auto rule = get<std::string>(e, "win_rule", "eval.");
      if (rule == "beats_mean") {
        c.win_rule = WinRule::kBeatsMean;
      } else if (rule == "beats_median") {
        c.win_rule = WinRule::kBeatsMedian;
      } else {
        throw ConfigError("eval.win_rule must be beats_mean or beats_median");
      }
    }
  }

  try {
    net.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (c.train.epochs < 1) throw ConfigError("epochs must be positive");
  if (!(c.train.divergence_factor > 1.0)) throw ConfigError("divergence_factor must exceed 1");
  if (c.layer < 1 || c.layer > kConvLayers) throw ConfigError("layer must be 1, 2 or 3");
  if (c.suggest.top_k < 0) throw ConfigError("suggest.top_k must be non-negative");
  if (c.n_random < 1) throw ConfigError("eval.n_random must be positive");
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const IoFailure& e) {
    throw ConfigError(e.what());
  }
  return parse_run_config(text);
}

std::string run_config_to_json(const RunConfig& c) {
  const auto& n = c.train.net;
  json convs = json::array();
  for (const auto& cv : n.convs) convs.push_back({{"filters", cv.filters}, {"kernel", cv.kernel}});
  json j{{"width", n.width},
         {"height", n.height},
         {"leaky_slope", n.leaky_slope},
         {"adam", {{"lr", n.adam.lr}, {"beta1", n.adam.beta1}, {"beta2", n.adam.beta2}, {"epsilon", n.adam.epsilon}}},
         {"seed", n.seed},
         {"epochs", c.train.epochs},
         {"convs", std::move(convs)},
         {"divergence_factor", c.train.divergence_factor},
         {"slice_norm", slice_norm_name(c.norm)},
         {"layer", c.layer},
         {"suggest", {{"threshold", c.suggest.threshold}, {"top_k", c.suggest.top_k}}},
         {"eval",
          {{"n_random", c.n_random},
           {"min_added", c.min_added},
           {"win_rule", c.win_rule == WinRule::kBeatsMean ? "beats_mean" : "beats_median"}}}};
  return j.dump(2) + "\n";
}

int run_train(const TrainArgs& args, std::ostream& log, std::ostream& err) {
  return guarded(err, [&] {
    RunConfig cfg = config_or_default(args.config);
    if (args.seed) cfg.train.net.seed = *args.seed;
    const auto sessions = load_corpus(args.sessions);
    if (sessions.empty()) throw DataError("corpus has no sessions");
    const auto& first = sessions.front().initial;
    if (!cfg.width_given) cfg.train.net.width = first.width();
    if (!cfg.height_given) cfg.train.net.height = first.height();
    for (const auto& s : sessions) {
      if (s.initial.width() != cfg.train.net.width || s.initial.height() != cfg.train.net.height) {
        throw DataError("session " + s.session_id + " does not match the configured grid size");
      }
    }
    const auto instances = build_training_set(sessions);
    log << "training on " << instances.size() << " instances from " << sessions.size()
        << " sessions, " << cfg.train.epochs << " epochs\n";
    std::string csv = "epoch,mean_loss\n";
    const auto result = train_with_attribution(cfg.train, instances, [&](int epoch, double loss) {
      csv += std::to_string(epoch) + "," + g17(loss) + "\n";
      log << "epoch " << epoch << " loss " << g17(loss) << "\n";
    });
    std::filesystem::create_directories(args.out);
    save_model(result.model, args.out / kModelFile);
    save_mrin(result.mrin, args.out / kMrinFile, args.audit_ledger ? &result.ledger : nullptr);
    write_file(args.out / kFingerprintFile, result.model.fingerprint + "\n");
    write_file(args.out / kTrainLogFile, csv);
    write_file(args.out / kConfigCopyFile, run_config_to_json(cfg));
    log << "fingerprint " << result.model.fingerprint << "\n";
    return kExitOk;
  });
}

int run_eval(const EvalArgs& args, std::ostream& log, std::ostream& err) {
  return guarded(err, [&] {
    RunConfig cfg;
    if (args.config) {
      cfg = load_run_config(*args.config);
    } else if (std::filesystem::exists(args.model_dir / kConfigCopyFile)) {
      cfg = load_run_config(args.model_dir / kConfigCopyFile);
    }
    const auto art = load_artifacts(args.model_dir, args.sessions);
    const auto test = load_corpus(args.test);
    EvalOptions o;
    o.n_random = cfg.n_random;
    o.min_added = cfg.min_added;
    o.seed = args.seed;
    o.win_rule = cfg.win_rule;
    o.layer = cfg.layer;
    o.norm = cfg.norm;
    const bool labels = args.kind == EvalKind::kLabels;
    const auto report = labels
                            ? labeling_error_eval(art.model, art.mrin, art.training_sessions, test, o)
                            : explainability_eval(art.model, art.mrin, art.training_sessions, test, o);
    const std::string stem = labels ? "labels_report" : "explain_report";
    const auto table = render_report_table(report, args.test.stem().string());
    std::filesystem::create_directories(args.out);
    write_file(args.out / (stem + ".txt"), table);
    write_file(args.out / (stem + ".json"), report_to_json(report));
    log << table;
    return kExitOk;
  });
}

int run_gen_data(const GenArgs& args, std::ostream& log, std::ostream& err) {
  return guarded(err, [&] {
    const auto corpus = gen_synthetic(args.seed, args.params);
    if (args.out.has_parent_path()) std::filesystem::create_directories(args.out.parent_path());
    save_sessions(corpus.sessions, args.out);
    if (args.labels_out) {
      json labels = json::array();
      for (const auto& e : corpus.injected) {
        labels.push_back({{"kind", label_kind_name(e.kind)},
                          {"session_id", e.session_id},
                          {"x", e.addition.x},
                          {"y", e.addition.y},
                          {"tile", std::string(1, Legend::standard().glyph(e.addition.tile))},
                          {"intro_turn", e.intro_turn},
                          {"decision_turn", e.decision_turn},
                          {"contradiction_turn", e.contradiction_turn}});
      }
      json motifs = json::array();
      for (auto m : corpus.session_motifs) motifs.push_back(motif_name(m));
      write_file(*args.labels_out,
                 json{{"seed", args.seed}, {"session_motifs", motifs}, {"injected", labels}}.dump(2) +
                     "\n");
    }
    log << "wrote " << corpus.sessions.size() << " sessions (" << corpus.injected.size()
        << " injected labeling errors) to " << args.out.string() << "\n";
    return kExitOk;
  });
}

int run_serve(const ServeArgs& args, std::ostream& log, std::ostream& err) {
  return guarded(err, [&] {
    RunConfig cfg;
    if (args.config) {
      cfg = load_run_config(*args.config);
    } else if (std::filesystem::exists(args.model_dir / kConfigCopyFile)) {
      cfg = load_run_config(args.model_dir / kConfigCopyFile);
    }
    const auto colon = args.bind.rfind(':');
    if (colon == std::string::npos) throw ConfigError("--bind must be host:port");
    const auto host = args.bind.substr(0, colon);
    int port = 0;
    try {
      port = std::stoi(args.bind.substr(colon + 1));
    } catch (const std::exception&) {
      throw ConfigError("--bind port is not a number");
    }
    if (port < 0 || port > 65535) throw ConfigError("--bind port out of range");
    ServiceOptions opts;
    opts.suggest = cfg.suggest;
    opts.layer = cfg.layer;
    opts.norm = cfg.norm;
    opts.live_log = args.live_log;
    opts.model_dir = args.model_dir;
    opts.sessions_path = args.sessions;
    CoService service(load_artifacts(args.model_dir, args.sessions), opts);
    serve_http(service, host, port, [&](int bound) {
      log << "listening on " << host << ":" << bound << "\n" << std::flush;
    });
    return kExitOk;
  });
}

}  // namespace mrin

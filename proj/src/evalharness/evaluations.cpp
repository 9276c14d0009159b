#include <algorithm>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "mrin/evalharness.hpp"
#include "mrin/random.hpp"

namespace mrin {
namespace {

using json = nlohmann::ordered_json;

const char* win_rule_name(WinRule r) {
  return r == WinRule::kBeatsMean ? "beats_mean" : "beats_median";
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

void check_pairing(const Model& model, const MrinArrays& mrin, const std::vector<Session>& train,
                   const EvalOptions& options) {
  if (model.fingerprint != mrin.fingerprint) {
    throw FingerprintMismatch("model fingerprint " + model.fingerprint +
                              " does not match MRIN fingerprint " + mrin.fingerprint);
  }
  std::vector<std::string> expected;
  for (const auto& s : train) {
    for (const auto& t : s.turns) {
      if (t.actor == Actor::kAgent) expected.push_back(s.session_id);
    }
  }
  if (expected != mrin.instance_sessions) {
    throw FingerprintMismatch("MRIN instances were not built from this training corpus");
  }
  if (train.empty() || train.size() - 1 < options.n_random) {
    throw NotEnoughTrainingLevels("need " + std::to_string(options.n_random) +
                                  " training levels besides the responsible one, corpus has " +
                                  std::to_string(train.size()));
  }
}

class Evaluator {
 public:
  Evaluator(const Model& model, const MrinArrays& mrin, const std::vector<Session>& train,
            const EvalOptions& options)
      : model_(model), mrin_(mrin), train_(train), options_(options) {}

  // Fills the responsible/random parts of `trace`; `key` selects the RNG substream.
  void score(ExampleTrace& trace, const TileGrid& query, const TileGrid& action, std::uint64_t key) {
    const auto e = explain(model_, mrin_, train_, query, options_.layer, options_.norm);
    trace.responsible_instance = e.instance_id;
    trace.responsible_session = e.session_id;
    trace.filter_index = e.filter_index;
    const auto r = local_overlap_ratio(e.responsible_level, action);
    trace.compared_patches = r.action_patches;
    trace.responsible_ratio = r.ratio;

    std::vector<std::size_t> pool;
    for (std::size_t i = 0; i < train_.size(); ++i) {
      if (train_[i].session_id != e.session_id) pool.push_back(i);
    }
    Rng rng = substream(options_.seed, key);
    for (auto k : sample_without_replacement(rng, pool.size(), options_.n_random)) {
      const auto& s = train_[pool[k]];
      trace.random_sessions.push_back(s.session_id);
      trace.random_ratios.push_back(local_overlap_ratio(s.final_level, action).ratio);
    }
    trace.random_mean = mean_of(trace.random_ratios);
    trace.random_baseline = options_.win_rule == WinRule::kBeatsMean
                                ? trace.random_mean
                                : median_of(trace.random_ratios);
    trace.win = trace.responsible_ratio > trace.random_baseline;
  }

 private:
  const Model& model_;
  const MrinArrays& mrin_;
  const std::vector<Session>& train_;
  const EvalOptions& options_;
};

void add_to(Tally& t, const ExampleTrace& tr) {
  ++t.count;
  if (tr.win) ++t.wins;
  t.mean_responsible_ratio += tr.responsible_ratio;
  t.mean_random_ratio += tr.random_mean;
}

void close(Tally& t) {
  if (t.count == 0) return;
  t.mean_responsible_ratio /= static_cast<double>(t.count);
  t.mean_random_ratio /= static_cast<double>(t.count);
}

EvalReport make_report(const char* name, const Model& model, const std::vector<Session>& train,
                       const std::vector<Session>& test, const EvalOptions& options) {
  EvalReport r;
  r.evaluation = name;
  r.seed = options.seed;
  r.n_random = options.n_random;
  r.min_added = options.min_added;
  r.win_rule = win_rule_name(options.win_rule);
  r.model_fingerprint = model.fingerprint;
  r.train_fingerprint = corpus_fingerprint(train);
  r.test_fingerprint = corpus_fingerprint(test);
  return r;
}

std::string fixed4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

json tally_json(const Tally& t) {
  return {{"count", t.count},
          {"wins", t.wins},
          {"win_rate", t.win_rate()},
          {"mean_responsible_ratio", t.mean_responsible_ratio},
          {"mean_random_ratio", t.mean_random_ratio}};
}

}  // namespace

std::string corpus_fingerprint(const std::vector<Session>& sessions) {
  Fnv1a h;
  h.update(serialize_sessions(sessions));
  return to_hex(h.digest());
}

EvalReport explainability_eval(const Model& model, const MrinArrays& mrin,
                               const std::vector<Session>& train, const std::vector<Session>& test,
                               const EvalOptions& options) {
  check_pairing(model, mrin, train, options);
  EvalReport report = make_report("explainability", model, train, test, options);
  Evaluator ev(model, mrin, train, options);
  std::uint64_t key = 0;
  for (const auto& s : test) {
    for (std::size_t t = 0; t < s.turns.size(); ++t) {
      const auto& turn = s.turns[t];
      if (turn.actor != Actor::kAgent || count_additions(turn.changes) <= options.min_added) continue;
      ExampleTrace tr;
      tr.kind = "action";
      tr.session_id = s.session_id;
      tr.turn = t;
      const auto state = level_before_turn(s, t);
      const auto action = changeset_to_grid(turn.changes, state.width(), state.height());
      try {
        ev.score(tr, state, action, key++);
      } catch (const EmptyAction& e) {
        tr.skipped = true;
        tr.skip_reason = e.what();
        ++report.skipped_count;
        report.traces.push_back(std::move(tr));
        continue;
      }
      add_to(report.combined, tr);
      report.traces.push_back(std::move(tr));
    }
  }
  report.eligible_count = report.combined.count;
  if (report.eligible_count == 0) throw NoEligibleInstances();
  close(report.combined);
  return report;
}

EvalReport labeling_error_eval(const Model& model, const MrinArrays& mrin,
                               const std::vector<Session>& train, const std::vector<Session>& test,
                               const EvalOptions& options) {
  check_pairing(model, mrin, train, options);
  EvalReport report = make_report("labeling_errors", model, train, test, options);
  Evaluator ev(model, mrin, train, options);
  std::uint64_t key = 0;
  std::size_t found = 0;
  for (const auto& s : test) {
    for (auto& ex : detect_label_errors(s)) {
      ++found;
      ExampleTrace tr;
      tr.kind = label_kind_name(ex.kind);
      tr.session_id = s.session_id;
      tr.turn = ex.intro_turn;
      tr.addition = ex.addition;
      const std::uint64_t k = key++;
      if (!ex.consistent) {
        tr.skipped = true;
        tr.skip_reason = "no contradicting edit found";
      } else {
        const auto action = changeset_to_grid(ex.d_state, ex.i_state.width(), ex.i_state.height());
        try {
          ev.score(tr, ex.i_state, action, k);
        } catch (const EmptyAction& e) {
          tr.skipped = true;
          tr.skip_reason = e.what();
        }
      }
      if (tr.skipped) {
        ++report.skipped_count;
      } else {
        add_to(report.combined, tr);
        add_to(ex.kind == LabelKind::kFalsePositive ? report.false_positive : report.false_negative, tr);
      }
      report.traces.push_back(std::move(tr));
    }
  }
  if (found == 0) throw NoExamplesFound();
  report.eligible_count = report.combined.count;
  close(report.combined);
  close(report.false_positive);
  close(report.false_negative);
  return report;
}

std::string render_report_table(const EvalReport& report, const std::string& test_set_name) {
  std::ostringstream os;
  auto row = [&](const std::string& name, const Tally& t) {
    os << "| " << name << " | " << fixed4(t.mean_responsible_ratio) << " | "
       << fixed4(t.mean_random_ratio) << " | " << fixed4(100.0 * t.win_rate()) << "% | " << t.count
       << " |\n";
  };
  os << "| TestSet | Most Responsible Level | Random Levels | Win Rate | N |\n";
  os << "|---|---|---|---|---|\n";
  row(test_set_name, report.combined);
  if (report.evaluation == "labeling_errors") {
    row(test_set_name + " (false positive)", report.false_positive);
    row(test_set_name + " (false negative)", report.false_negative);
  }
  os << "\nevaluation: " << report.evaluation << "  seed: " << report.seed
     << "  random levels: " << report.n_random << "  win rule: " << report.win_rule
     << "  skipped: " << report.skipped_count << "\n";
  return os.str();
}

std::string report_to_json(const EvalReport& report) {
  json j;
  j["schema"] = "mrin.evalreport";
  j["version"] = 1;
  j["evaluation"] = report.evaluation;
  j["seed"] = report.seed;
  j["n_random"] = report.n_random;
  j["min_added"] = report.min_added;
  j["win_rule"] = report.win_rule;
  j["model_fingerprint"] = report.model_fingerprint;
  j["train_fingerprint"] = report.train_fingerprint;
  j["test_fingerprint"] = report.test_fingerprint;
  j["eligible_count"] = report.eligible_count;
  j["skipped_count"] = report.skipped_count;
  j["combined"] = tally_json(report.combined);
  if (report.evaluation == "labeling_errors") {
    j["false_positive"] = tally_json(report.false_positive);
    j["false_negative"] = tally_json(report.false_negative);
  }
  json traces = json::array();
  for (const auto& t : report.traces) {
    json tj;
    tj["kind"] = t.kind;
    tj["session_id"] = t.session_id;
    tj["turn"] = t.turn;
    if (t.kind != "action") {
      tj["addition"] = {{"x", t.addition.x}, {"y", t.addition.y}, {"tile", t.addition.tile}};
    }
    tj["skipped"] = t.skipped;
    if (t.skipped) {
      tj["skip_reason"] = t.skip_reason;
    } else {
      tj["compared_patches"] = t.compared_patches;
      tj["responsible_instance"] = t.responsible_instance;
      tj["responsible_session"] = t.responsible_session;
      tj["filter_index"] = t.filter_index;
      tj["responsible_ratio"] = t.responsible_ratio;
      tj["random_sessions"] = t.random_sessions;
      tj["random_ratios"] = t.random_ratios;
      tj["random_baseline"] = t.random_baseline;
      tj["random_mean"] = t.random_mean;
      tj["win"] = t.win;
    }
    traces.push_back(std::move(tj));
  }
  j["traces"] = std::move(traces);
  return j.dump(2) + "\n";
}

}  // namespace mrin

#include <iostream>

#include "CLI11.hpp"
#include "mrin/coservice.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Most-responsible-instance training, evaluation and co-creation service"};
  app.require_subcommand(1);

  mrin::TrainArgs train;
  std::string train_config, train_sessions, train_out;
  std::uint64_t train_seed = 0;
  auto* t = app.add_subcommand("train", "Train the network and record the attribution ledger");
  t->add_option("--config", train_config, "Run configuration (JSON)");
  t->add_option("--sessions", train_sessions, "Training session log")->required();
  t->add_option("--out", train_out, "Output model directory")->required();
  auto* seed_opt = t->add_option("--seed", train_seed, "Override the configured seed");
  t->add_flag("--audit-ledger", train.audit_ledger, "Store the full delta ledger in the MRIN file");

  auto add_eval = [&](const char* name, const char* help, mrin::EvalArgs& a, std::string& config,
                      std::string& model, std::string& sessions, std::string& test, std::string& out) {
    auto* e = app.add_subcommand(name, help);
    e->add_option("--config", config, "Run configuration (defaults to the model's copy)");
    e->add_option("--model", model, "Model directory produced by train")->required();
    e->add_option("--sessions", sessions, "Training session log")->required();
    e->add_option("--test", test, "Test session log")->required();
    e->add_option("--seed", a.seed, "Seed for the random-level draws");
    e->add_option("--out", out, "Report directory")->required();
    return e;
  };
  mrin::EvalArgs ex, lb;
  ex.kind = mrin::EvalKind::kExplain;
  lb.kind = mrin::EvalKind::kLabels;
  std::string ex_cfg, ex_model, ex_sessions, ex_test, ex_out;
  std::string lb_cfg, lb_model, lb_sessions, lb_test, lb_out;
  auto* e1 = add_eval("eval-explain", "Responsible vs random levels against the next agent action",
                      ex, ex_cfg, ex_model, ex_sessions, ex_test, ex_out);
  auto* e2 = add_eval("eval-labels", "Responsible vs random levels against labeling-error D-states",
                      lb, lb_cfg, lb_model, lb_sessions, lb_test, lb_out);

  mrin::GenArgs gen;
  std::string gen_out, gen_labels;
  auto* g = app.add_subcommand("gen-data", "Write a synthetic co-creation corpus");
  g->add_option("--seed", gen.seed, "Generator seed")->required();
  g->add_option("--out", gen_out, "Session log to write")->required();
  g->add_option("--labels-out", gen_labels, "Ground-truth labeling errors (JSON)");
  g->add_option("--n-sessions", gen.params.n_sessions, "Number of sessions");
  g->add_option("--width", gen.params.width, "Level width");
  g->add_option("--height", gen.params.height, "Level height");
  g->add_option("--fp-rate", gen.params.fp_rate, "False-positive injection rate");
  g->add_option("--fn-rate", gen.params.fn_rate, "False-negative injection rate");
  g->add_option("--agent-turns", gen.params.agent_turns, "Agent turns per session");
  g->add_option("--prefix", gen.params.id_prefix, "Session id prefix");

  mrin::ServeArgs serve;
  std::string serve_cfg, serve_model, serve_sessions, serve_live;
  auto* s = app.add_subcommand("serve", "Serve suggest/explain/session endpoints");
  s->add_option("--config", serve_cfg, "Run configuration (defaults to the model's copy)");
  s->add_option("--model", serve_model, "Model directory produced by train")->required();
  s->add_option("--sessions", serve_sessions, "Training session log")->required();
  s->add_option("--bind", serve.bind, "host:port")->capture_default_str();
  s->add_option("--live-log", serve_live, "Session log for live sessions");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : mrin::kExitConfig;
  }

  auto finish_eval = [](mrin::EvalArgs& a, const std::string& config, const std::string& model,
                        const std::string& sessions, const std::string& test, const std::string& out) {
    if (!config.empty()) a.config = config;
    a.model_dir = model;
    a.sessions = sessions;
    a.test = test;
    a.out = out;
    return mrin::run_eval(a, std::cout, std::cerr);
  };

  if (*t) {
    if (!train_config.empty()) train.config = train_config;
    if (*seed_opt) train.seed = train_seed;
    train.sessions = train_sessions;
    train.out = train_out;
    return mrin::run_train(train, std::cout, std::cerr);
  }
  if (*e1) return finish_eval(ex, ex_cfg, ex_model, ex_sessions, ex_test, ex_out);
  if (*e2) return finish_eval(lb, lb_cfg, lb_model, lb_sessions, lb_test, lb_out);
  if (*g) {
    gen.out = gen_out;
    if (!gen_labels.empty()) gen.labels_out = gen_labels;
    return mrin::run_gen_data(gen, std::cout, std::cerr);
  }
  if (*s) {
    if (!serve_cfg.empty()) serve.config = serve_cfg;
    serve.model_dir = serve_model;
    serve.sessions = serve_sessions;
    serve.live_log = serve_live;
    return mrin::run_serve(serve, std::cout, std::cerr);
  }
  return mrin::kExitConfig;
}

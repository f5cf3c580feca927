#include "scenesearch/cli.hpp"

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "scenesearch/config.hpp"
#include "scenesearch/envserver.hpp"
#include "scenesearch/errors.hpp"

namespace scenesearch {

namespace {

struct Overrides {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> planner;
  std::optional<double> lambda_efficiency;
  std::optional<int> max_steps;
  std::optional<std::string> out;
};

void add_common(CLI::App* cmd, Overrides& o, bool with_planner) {
  cmd->add_option("--config", o.config_path, "TOML run configuration");
  cmd->add_option("--seed", o.seed, "Seed (overrides the config)");
  if (with_planner)
    cmd->add_option("--planner", o.planner, "oracle | random | greedy | student:<ckpt> | remote:<host:port>");
  cmd->add_option("--lambda-efficiency", o.lambda_efficiency, "Weight of the distance penalty");
  cmd->add_option("--max-steps", o.max_steps, "Step budget per episode");
}

RunConfig resolve(const Overrides& o) {
  RunConfig cfg = o.config_path.empty() ? RunConfig{} : load_config(o.config_path);
  if (o.seed) cfg.seed = *o.seed;
  if (o.planner) cfg.planner = *o.planner;
  if (o.lambda_efficiency) cfg.reward.lambda_efficiency = *o.lambda_efficiency;
  if (o.max_steps) cfg.max_steps = *o.max_steps;
  if (o.out) cfg.output_dir = *o.out;
  validate_config(cfg);
  return cfg;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << text;
  if (!f) throw std::runtime_error("failed writing " + path.string());
}

std::string fmt(const char* format, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, format, v);
  return buf;
}

int cmd_generate(const Overrides& o, const std::optional<std::string>& dot_path, std::ostream& out) {
  const RunConfig cfg = resolve(o);
  const HouseSpec house = generate_house(cfg.seed, cfg.profile);
  const std::string text = serialize_house(house);
  if (o.out) {
    write_file(*o.out, text);
  } else {
    out << text;
  }
  if (dot_path) {
    const auto env = make_environment(house);
    write_file(*dot_path, nav_graph_to_dot(env->nav, &env->house));
  }
  return kExitOk;
}

int cmd_run(const Overrides& o, std::uint64_t task_seed, std::ostream& out) {
  const RunConfig cfg = resolve(o);
  const PlannerRef ref = parse_planner_ref(cfg.planner);
  const Scenario sc = make_scenario(cfg.seed, task_seed, cfg.profile);
  auto planner = make_planner(ref, cfg.seed, cfg.seed, static_cast<int>(task_seed), cfg.planner_timeout_ms);
  const EpisodeRecord rec = run_episode(*planner, sc, cfg.suite_config().episode);
  out << render_step_table(rec);
  if (o.out) write_file(*o.out, episode_to_json(rec).dump() + "\n");
  return rec.fault ? kExitRuntime : kExitOk;
}

int cmd_train(const Overrides& o, std::optional<int> fewshot_epochs, std::optional<int> epochs, bool no_rl,
              bool no_sft, std::ostream& out) {
  RunConfig cfg = resolve(o);
  if (fewshot_epochs) cfg.train.num_epochs_fewshot = *fewshot_epochs;
  if (epochs) cfg.train.num_epochs = *epochs;
  if (no_rl) cfg.train.rl_enabled = false;
  if (no_sft) cfg.train.sft_enabled = false;
  validate_config(cfg);
  const TrainConfig tc = cfg.train_config();
  const std::filesystem::path dir = cfg.output_dir;

  TrainLog log;
  PolicyParams p;
  if (tc.num_epochs_fewshot > 0 && tc.fewshot_samples > 0) {
    const auto data = collect_teacher_dataset(tc.train_seeds, tc.fewshot_samples, tc);
    std::ostringstream ds;
    write_dataset(ds, data);
    write_file(dir / "dataset.ndjson", ds.str());
    p = stage1_fewshot_sft(std::move(p), data, tc, &log);
  }
  p = stage2_interleaved(std::move(p), tc, &log);

  write_file(dir / "checkpoint.json", checkpoint_to_json(p).dump(2) + "\n");
  write_file(dir / "config.toml", config_to_toml(cfg));
  std::ostringstream csv;
  csv << "phase,index,value\n";
  for (std::size_t i = 0; i < log.fewshot_loss.size(); ++i) csv << "fewshot_loss," << i << "," << fmt("%.9f", log.fewshot_loss[i]) << "\n";
  for (std::size_t i = 0; i < log.episode_sft_loss.size(); ++i)
    csv << "episode_sft_loss," << i << "," << fmt("%.9f", log.episode_sft_loss[i]) << "\n";
  for (std::size_t i = 0; i < log.epoch_train_sr.size(); ++i) csv << "epoch_train_sr," << i << "," << fmt("%.4f", log.epoch_train_sr[i]) << "\n";
  for (std::size_t i = 0; i < log.ppo.size(); ++i) csv << "ppo_entropy," << i << "," << fmt("%.9f", log.ppo[i].entropy) << "\n";
  write_file(dir / "metrics.csv", csv.str());

  out << "few-shot loss:";
  for (double l : log.fewshot_loss) out << " " << fmt("%.4f", l);
  out << "\ntraining SR per epoch:";
  for (double s : log.epoch_train_sr) out << " " << fmt("%.2f", s);
  out << "\nskipped teacher labels: " << log.skipped_labels << "\n";
  out << "checkpoint: " << (dir / "checkpoint.json").string() << "\n";
  return kExitOk;
}

int cmd_eval(const Overrides& o, const std::optional<std::string>& plot_path, std::optional<int> runs,
             std::ostream& out) {
  RunConfig cfg = resolve(o);
  if (runs) cfg.runs_per_scene = *runs;
  validate_config(cfg);
  const PlannerRef ref = parse_planner_ref(cfg.planner);
  const std::filesystem::path dir = cfg.output_dir;
  std::filesystem::create_directories(dir);
  std::ofstream jsonl(dir / "episodes.jsonl", std::ios::binary);
  if (!jsonl) throw std::runtime_error("cannot write " + (dir / "episodes.jsonl").string());
  const auto [summary, records] = eval_suite(
      [&](std::uint64_t scene, int run) { return make_planner(ref, cfg.seed, scene, run, cfg.planner_timeout_ms); },
      cfg.suite_config(), &jsonl);
  jsonl.close();
  const std::string table = format_summary_table({{ref.name, summary}});
  write_file(dir / "summary.txt", table);
  write_file(dir / "config.toml", config_to_toml(cfg));
  if (plot_path) write_file(*plot_path, plot_data_csv(records));
  out << table;
  out << "Dist. over successes only: " << fmt("%.2f", summary.dist_success) << "\n";
  return kExitOk;
}

TcpListener* g_listener = nullptr;

void stop_listener(int) {
  if (g_listener) g_listener->close();
}

int cmd_serve(const Overrides& o, int port, const std::string& host, bool stdio, std::ostream& err) {
  const RunConfig cfg = resolve(o);
  ServerConfig sc{cfg.profile, cfg.reward, cfg.max_steps};
  if (stdio) {
    FdLineChannel channel(0, 1, false);
    serve_channel(channel, sc);
    return kExitOk;
  }
  TcpListener listener(static_cast<std::uint16_t>(port), host);
  err << "listening on " << host << ":" << listener.port() << "\n";
  g_listener = &listener;
  std::signal(SIGINT, stop_listener);
  std::signal(SIGTERM, stop_listener);
  serve_tcp(listener, sc);
  g_listener = nullptr;
  return kExitOk;
}

std::vector<EpisodeRecord> read_log(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SchemaMismatch("cannot read episode log " + path);
  std::vector<EpisodeRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw SchemaMismatch("episode log line is not JSON: " + std::string(e.what()));
    }
    out.push_back(episode_from_json(doc));
  }
  if (out.empty()) throw SchemaMismatch("episode log " + path + " has no records");
  return out;
}

int cmd_replay(const std::string& log_path, std::size_t index, const std::optional<std::string>& plot_path,
               const std::optional<std::string>& svg_path, std::ostream& out) {
  const auto records = read_log(log_path);
  if (index >= records.size())
    throw ConfigError("episode index " + std::to_string(index) + " out of range (" + std::to_string(records.size()) +
                         " records)");
  const EpisodeRecord& rec = records[index];
  const auto env = make_environment(generate_house(rec.scene_seed, rec.profile));
  out << render_step_table(rec) << "\n" << render_ascii_trace(rec, env->house, env->nav);
  if (plot_path) write_file(*plot_path, plot_data_csv({rec}));
  if (svg_path) write_file(*svg_path, render_svg_trace(rec, env->house, env->nav));
  return kExitOk;
}

}  // namespace

std::string render_step_table(const EpisodeRecord& r) {
  std::ostringstream out;
  out << "scene " << r.scene_seed << ", task " << r.task_seed << ": find a " << r.task.goal_category << " with "
      << r.planner << "\n";
  char line[512];
  std::snprintf(line, sizeof line, "%4s  %-44s  %4s  %7s  %5s  %8s\n", "step", "action", "exec", "dist", "nodes",
                "reward");
  out << line;
  for (std::size_t i = 0; i < r.steps.size(); ++i) {
    const StepRecord& s = r.steps[i];
    const std::string action = s.failure ? "<parse failure: " + *s.failure + ">" : s.action;
    std::snprintf(line, sizeof line, "%4zu  %-44s  %4s  %7.2f  %5d  %8.4f\n", i + 1, action.c_str(),
                  s.executable ? "yes" : "no", s.dist_delta, s.new_nodes, s.reward.total);
    out << line;
  }
  std::snprintf(line, sizeof line, "result: %s, %zu steps, distance %.2f m (shortest %.2f m), retrials %d\n",
                r.success ? "success" : "failure", r.steps.size(), r.dist_total, r.shortest_possible, r.retrials);
  out << line;
  if (r.fault) out << "fault: " << *r.fault << "\n";
  return out.str();
}

namespace {

char step_mark(std::size_t step) {
  static const char* marks = "123456789abcdefghijklmnopqrstuvwxyz";
  return step < 35 ? marks[step] : '+';
}

}  // namespace

std::string render_ascii_trace(const EpisodeRecord& r, const HouseSpec& house, const NavGraph& nav) {
  std::vector<std::string> grid(static_cast<std::size_t>(house.height), std::string(static_cast<std::size_t>(house.width), '#'));
  for (int y = 0; y < house.height; ++y)
    for (int x = 0; x < house.width; ++x)
      if (house.is_free(Cell{x, y})) grid[static_cast<std::size_t>(y)][static_cast<std::size_t>(x)] = '.';
  for (const ObjectSpec& obj : house.objects)
    if (obj.category == r.task.goal_category) grid[static_cast<std::size_t>(obj.cell.y)][static_cast<std::size_t>(obj.cell.x)] = 'G';
  for (std::size_t i = 0; i < r.steps.size(); ++i)
    for (NodeId n : r.steps[i].path) {
      if (!nav.has_node(n)) continue;
      const Cell c = nav.node(n).cell;
      grid[static_cast<std::size_t>(c.y)][static_cast<std::size_t>(c.x)] = step_mark(i);
    }
  grid[static_cast<std::size_t>(r.task.start_cell.y)][static_cast<std::size_t>(r.task.start_cell.x)] = 'S';
  std::ostringstream out;
  for (const std::string& row : grid) out << row << "\n";
  out << "S start, G goal instances, digits/letters: nodes walked at that step\n";
  return out.str();
}

std::string render_svg_trace(const EpisodeRecord& r, const HouseSpec& house, const NavGraph& nav) {
  const int px = 20;
  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << house.width * px << "\" height=\"" << house.height * px
      << "\">\n";
  for (int y = 0; y < house.height; ++y)
    for (int x = 0; x < house.width; ++x)
      out << "<rect x=\"" << x * px << "\" y=\"" << y * px << "\" width=\"" << px << "\" height=\"" << px << "\" fill=\""
          << (house.is_free(Cell{x, y}) ? "#f4f4f4" : "#404040") << "\"/>\n";
  for (const ObjectSpec& obj : house.objects) {
    const bool goal = obj.category == r.task.goal_category;
    out << "<circle cx=\"" << obj.cell.x * px + px / 2 << "\" cy=\"" << obj.cell.y * px + px / 2 << "\" r=\"" << px / 4
        << "\" fill=\"" << (goal ? "#d62728" : "#1f77b4") << "\"><title>" << obj.category << "</title></circle>\n";
  }
  for (std::size_t i = 0; i < r.steps.size(); ++i) {
    if (r.steps[i].path.size() < 2) continue;
    out << "<polyline fill=\"none\" stroke=\"#2ca02c\" stroke-width=\"3\" points=\"";
    for (NodeId n : r.steps[i].path) {
      if (!nav.has_node(n)) continue;
      const Cell c = nav.node(n).cell;
      out << c.x * px + px / 2 << "," << c.y * px + px / 2 << " ";
    }
    out << "\"><title>step " << i + 1 << ": " << r.steps[i].action << "</title></polyline>\n";
  }
  out << "<rect x=\"" << r.task.start_cell.x * px + px / 4 << "\" y=\"" << r.task.start_cell.y * px + px / 4
      << "\" width=\"" << px / 2 << "\" height=\"" << px / 2 << "\" fill=\"#ff7f0e\"/>\n";
  out << "</svg>\n";
  return out.str();
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Seeded simulator, evaluation harness and trainer for scene-graph object search", "scenesearch"};
  app.require_subcommand(1);

  Overrides gen, run, train, eval, serve;
  std::optional<std::string> dot_path;
  auto* g = app.add_subcommand("generate", "Write a generated house as canonical JSON");
  add_common(g, gen, false);
  g->add_option("--out", gen.out, "Output file (default: stdout)");
  g->add_option("--nav-dot", dot_path, "Also write the navigation graph as DOT");

  std::uint64_t task_seed = 0;
  auto* r = app.add_subcommand("run", "Run one episode and print its step table");
  add_common(r, run, true);
  r->add_option("--task-seed", task_seed, "Task seed within the scene");
  r->add_option("--out", run.out, "Append the episode record to this JSONL file");

  std::optional<int> fewshot_epochs, epochs;
  bool no_rl = false, no_sft = false;
  auto* t = app.add_subcommand("train", "Few-shot SFT, then interleaved RL and SFT; writes a checkpoint");
  add_common(t, train, false);
  t->add_option("--out", train.out, "Output directory");
  t->add_option("--fewshot-epochs", fewshot_epochs, "Epochs of the few-shot stage");
  t->add_option("--epochs", epochs, "Epochs of the interleaved stage");
  t->add_flag("--no-rl", no_rl, "Disable the RL update");
  t->add_flag("--no-sft", no_sft, "Disable the SFT update in the interleaved stage");

  std::optional<std::string> eval_plot;
  std::optional<int> runs;
  auto* e = app.add_subcommand("eval", "Run the test suite and print SR, SPL, Dist. and Retrials");
  add_common(e, eval, true);
  e->add_option("--out", eval.out, "Output directory");
  e->add_option("--runs", runs, "Runs per test scene");
  e->add_option("--emit-plot-data", eval_plot, "Write per-step CSV");

  int port = 7878;
  std::string host = "127.0.0.1";
  bool stdio = false;
  auto* s = app.add_subcommand("serve", "Serve reset/step sessions over TCP or stdio");
  add_common(s, serve, false);
  s->add_option("--port", port, "TCP port (0 picks a free one)");
  s->add_option("--host", host, "Listen address");
  s->add_flag("--stdio", stdio, "Serve one session stream on stdin/stdout");

  std::string log_path;
  std::size_t index = 0;
  std::optional<std::string> replay_plot, svg_path;
  auto* p = app.add_subcommand("replay", "Print an episode from a log as a step table and map trace");
  p->add_option("log", log_path, "Episode JSONL file")->required();
  p->add_option("--episode", index, "Record index in the log");
  p->add_option("--emit-plot-data", replay_plot, "Write per-step CSV");
  p->add_option("--render-trace", svg_path, "Write an SVG map trace");

  std::vector<const char*> argv;
  for (const std::string& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& ex) {
    const int code = app.exit(ex, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*g) return cmd_generate(gen, dot_path, out);
    if (*r) return cmd_run(run, task_seed, out);
    if (*t) return cmd_train(train, fewshot_epochs, epochs, no_rl, no_sft, out);
    if (*e) return cmd_eval(eval, eval_plot, runs, out);
    if (*s) return cmd_serve(serve, port, host, stdio, err);
    if (*p) return cmd_replay(log_path, index, replay_plot, svg_path, out);
  } catch (const ConfigError& ex) {
    err << "config error: " << ex.what() << "\n";
    return kExitConfig;
  } catch (const InvalidParams& ex) {
    err << "config error: " << ex.what() << "\n";
    return kExitConfig;
  } catch (const Error& ex) {
    err << "error [" << ex.code() << "]: " << ex.what() << "\n";
    return kExitRuntime;
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << "\n";
    return kExitRuntime;
  }
  return kExitConfig;
}

}  // namespace scenesearch

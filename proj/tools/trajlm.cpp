#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "trajlm/errors.hpp"
#include "trajlm/generator.hpp"
#include "trajlm/harness.hpp"
#include "trajlm/metrics.hpp"
#include "trajlm/plot.hpp"
#include "trajlm/scene_io.hpp"

namespace {

void ensure_parent_dir(const std::string& path) {
  const std::filesystem::path parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::string item;
  for (char c : text) {
    if (c == ',') {
      if (!item.empty()) out.push_back(item);
      item.clear();
    } else if (c != ' ') {
      item.push_back(c);
    }
  }
  if (!item.empty()) out.push_back(item);
  return out;
}

struct GenerateArgs {
  std::size_t count = 200;
  std::uint64_t seed = 1;
  std::string out = "scenes.jsonl";
  std::string config;
};

int run_generate(const GenerateArgs& args) {
  trajlm::GeneratorConfig config;
  if (!args.config.empty()) config = trajlm::load_generator_config(args.config);
  const std::vector<trajlm::Scene> scenes = trajlm::generate_dataset(args.count, args.seed, config);
  ensure_parent_dir(args.out);
  trajlm::save_scenes(scenes, args.out);
  std::cout << "wrote " << scenes.size() << " scenes to " << args.out << "\n";
  return trajlm::exit_code::kOk;
}

int run_train(const std::string& config_path) {
  const trajlm::TrainConfig config = trajlm::load_train_config(config_path);
  std::vector<double> losses;
  const trajlm::Checkpoint checkpoint = trajlm::train(config, &losses, &std::cout);
  ensure_parent_dir(config.checkpoint);
  trajlm::save_checkpoint(checkpoint, config.checkpoint);
  std::cout << "saved checkpoint to " << config.checkpoint;
  if (!losses.empty()) std::cout << " (final loss " << losses.back() << ")";
  std::cout << "\n";
  return trajlm::exit_code::kOk;
}

int run_evaluate(const std::string& checkpoint_path, const std::string& data_path,
                 const std::string& report_path) {
  const trajlm::Checkpoint checkpoint = trajlm::load_checkpoint(checkpoint_path);
  trajlm::EvalOptions options;
  options.csv_path = std::filesystem::path(report_path).replace_extension(".csv").string();
  ensure_parent_dir(report_path);
  const trajlm::MetricsReport report = trajlm::evaluate(checkpoint, data_path, options);
  trajlm::save_report(report, report_path);
  for (std::size_t h = 0; h < report.ade.size(); ++h)
    std::cout << "ADE(" << report.ade_labels[h] << ")  " << report.ade[h].first << " +/- "
              << report.ade[h].second << "\n";
  for (std::size_t h = 0; h < report.fde.size(); ++h)
    std::cout << "FDE(" << report.fde_labels[h] << ")  " << report.fde[h].first << " +/- "
              << report.fde[h].second << "\n";
  std::cout << "MR      " << report.mr << "\n"
            << "IE      " << report.ie_s << " s/scene\n"
            << "scenes  " << report.n_scenes << "\n"
            << "wrote " << report_path << " and " << options.csv_path << "\n";
  return trajlm::exit_code::kOk;
}

int run_ablate(const std::string& config_path, const std::string& modalities_list,
               const std::string& out_path) {
  const trajlm::TrainConfig config = trajlm::load_train_config(config_path);
  const std::vector<std::string> modalities = split_list(modalities_list);
  const std::vector<trajlm::Scene> train_set = trajlm::load_scenes(config.train_data);
  const std::vector<trajlm::Scene> eval_set = trajlm::load_scenes(config.eval_data);
  const trajlm::AblationTable table =
      trajlm::run_ablation(config, modalities, train_set, eval_set, &std::cout);
  ensure_parent_dir(out_path);
  std::ofstream out(out_path, std::ios::trunc);
  if (!out) throw trajlm::DataError("cannot write ablation table '" + out_path + "'");
  out << trajlm::ablation_to_json(table) << "\n";
  std::cout << trajlm::format_ablation_table(table) << "wrote " << out_path << "\n";
  return trajlm::exit_code::kOk;
}

int run_plot(const std::string& scene_id, const std::vector<std::string>& checkpoint_paths,
             const std::string& data_path, const std::string& out_path) {
  std::vector<trajlm::Checkpoint> checkpoints;
  for (const std::string& path : checkpoint_paths)
    checkpoints.push_back(trajlm::load_checkpoint(path));
  const std::string source = data_path.empty() ? checkpoints.front().config.eval_data : data_path;
  const std::vector<trajlm::Scene> scenes = trajlm::load_scenes(source);

  const trajlm::Scene* scene = nullptr;
  for (const trajlm::Scene& s : scenes)
    if (s.id == scene_id) scene = &s;
  if (!scene) throw trajlm::DataError("scene '" + scene_id + "' not found in '" + source + "'");

  std::vector<trajlm::PredictedTrajectory> predictions;
  for (const trajlm::Checkpoint& ck : checkpoints) {
    const trajlm::LoadedModel model = trajlm::assemble_model(ck);
    model.pipeline->check_scene(*scene);
    predictions.push_back(model.pipeline->predict(*scene));
  }
  ensure_parent_dir(out_path);
  trajlm::render_scene_plot(*scene, predictions, out_path);
  std::cout << "wrote plot of scene " << scene_id << " to " << out_path << "\n";
  return trajlm::exit_code::kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"vehicle trajectory prediction: data generation, training, evaluation, plots"};
  app.require_subcommand(1);

  GenerateArgs gen;
  CLI::App* generate = app.add_subcommand("generate", "write a synthetic scene dataset as JSONL");
  generate->add_option("--count", gen.count, "number of scenes");
  generate->add_option("--seed", gen.seed, "base seed; scene i uses seed + i");
  generate->add_option("--out", gen.out, "output JSONL path");
  generate->add_option("--config", gen.config, "generator config JSON");

  std::string train_config;
  CLI::App* train = app.add_subcommand("train", "train the adapters around the frozen backbone");
  train->add_option("--config", train_config, "train config JSON")->required();

  std::string eval_checkpoint, eval_data, eval_report;
  CLI::App* evaluate = app.add_subcommand("evaluate", "run a checkpoint over a dataset");
  evaluate->add_option("--checkpoint", eval_checkpoint, "checkpoint file")->required();
  evaluate->add_option("--data", eval_data, "scene JSONL")->required();
  evaluate->add_option("--report", eval_report, "metrics report JSON to write")->required();

  std::string ablate_config, ablate_modalities = "ego_only,ego_neighbor,ego_neighbor_map";
  std::string ablate_out = "ablation.json";
  CLI::App* ablate = app.add_subcommand("ablate", "train and evaluate one model per modality");
  ablate->add_option("--config", ablate_config, "train config JSON")->required();
  ablate->add_option("--modalities", ablate_modalities, "comma-separated modality list");
  ablate->add_option("--out", ablate_out, "comparison table JSON to write");

  std::string plot_scene_id, plot_data, plot_out;
  std::vector<std::string> plot_checkpoints;
  CLI::App* plot = app.add_subcommand("plot", "render one scene with predictions to a PNG");
  plot->add_option("--scene", plot_scene_id, "scene id")->required();
  plot->add_option("--checkpoint", plot_checkpoints, "checkpoint file (repeat for overlays)")
      ->required();
  plot->add_option("--data", plot_data, "scene JSONL (default: the checkpoint's eval_data)");
  plot->add_option("--out", plot_out, "output PNG path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? trajlm::exit_code::kOk : trajlm::exit_code::kConfig;
  }

  try {
    if (app.got_subcommand(generate)) return run_generate(gen);
    if (app.got_subcommand(train)) return run_train(train_config);
    if (app.got_subcommand(evaluate)) return run_evaluate(eval_checkpoint, eval_data, eval_report);
    if (app.got_subcommand(ablate)) return run_ablate(ablate_config, ablate_modalities, ablate_out);
    if (app.got_subcommand(plot)) return run_plot(plot_scene_id, plot_checkpoints, plot_data, plot_out);
  } catch (const trajlm::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return trajlm::exit_code::kConfig;
  } catch (const trajlm::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return trajlm::exit_code::kData;
  } catch (const trajlm::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return trajlm::exit_code::kNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return trajlm::exit_code::kOk;
}

// ensemble-forge: diversity, subset selection, and fusion over classifier
// prediction tables, plus the desk-scale embedding lab.
//
// Exit codes: 0 success, 1 validation error, 2 I/O error. Diagnostics go to
// stderr; data goes to stdout or the file named by --out.

#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <string>
#include <vector>

#include "forge/diversity.hpp"
#include "forge/experiment.hpp"
#include "forge/fusion.hpp"
#include "forge/manifest.hpp"
#include "forge/metric_lab.hpp"
#include "forge/prediction_table.hpp"
#include "forge/umda.hpp"

namespace {

using ordered_json = nlohmann::ordered_json;

void write_output(const std::string& text, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw forge::IoError("cannot write '" + out_path + "'");
  out << text;
  if (!out) throw forge::IoError("write failed for '" + out_path + "'");
}

std::string read_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw forge::IoError("cannot open '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

forge::ReportFormat report_format_from_string(const std::string& text) {
  if (text == "json") return forge::ReportFormat::json;
  if (text == "csv") return forge::ReportFormat::csv;
  if (text == "markdown" || text == "md") return forge::ReportFormat::markdown;
  throw forge::InvalidConfig("unknown report format: " + text);
}

// Mask spec: compact bits ("01101"), comma-separated bits ("0,1,1"), or a
// comma-separated list of classifier names.
forge::EnsembleMask parse_mask_spec(const std::string& spec, const forge::PredictionTable& table) {
  std::vector<std::string> tokens;
  std::size_t pos = 0;
  while (true) {
    const std::size_t comma = spec.find(',', pos);
    tokens.push_back(spec.substr(pos, comma - pos));
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }

  const auto is_bits = [](const std::string& s) {
    return !s.empty() && s.find_first_not_of("01") == std::string::npos;
  };

  if (tokens.size() == 1 && is_bits(tokens[0]) && tokens[0].size() > 1) {
    return forge::EnsembleMask::from_string(tokens[0]);
  }
  const bool all_single_bits =
      std::all_of(tokens.begin(), tokens.end(),
                  [](const std::string& s) { return s == "0" || s == "1"; });
  if (all_single_bits && tokens.size() > 1) {
    forge::EnsembleMask mask(tokens.size());
    for (std::size_t i = 0; i < tokens.size(); ++i) mask.bits[i] = tokens[i] == "1" ? 1 : 0;
    return mask;
  }

  forge::EnsembleMask mask(table.pool_size());
  for (const std::string& name : tokens) {
    const auto it = std::find(table.classifier_names.begin(), table.classifier_names.end(), name);
    if (it == table.classifier_names.end()) {
      throw forge::InvalidConfig("classifier '" + name + "' is not in the table");
    }
    mask.bits[static_cast<std::size_t>(it - table.classifier_names.begin())] = 1;
  }
  return mask;
}

std::vector<std::pair<std::string, double>> parse_baselines(
    const std::vector<std::string>& specs) {
  std::vector<std::pair<std::string, double>> baselines;
  for (const std::string& spec : specs) {
    const std::size_t eq = spec.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw forge::InvalidConfig("baseline must look like NAME=VALUE, got '" + spec + "'");
    }
    try {
      baselines.emplace_back(spec.substr(0, eq), std::stod(spec.substr(eq + 1)));
    } catch (const std::exception&) {
      throw forge::InvalidConfig("baseline value in '" + spec + "' is not a number");
    }
  }
  return baselines;
}

forge::Embedding parse_point(const std::string& text) {
  forge::Embedding point;
  std::size_t pos = 0;
  while (true) {
    const std::size_t comma = text.find(',', pos);
    const std::string cell = text.substr(pos, comma - pos);
    try {
      point.push_back(std::stod(cell));
    } catch (const std::exception&) {
      throw forge::InvalidConfig("coordinate '" + cell + "' is not a number");
    }
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return point;
}

// Pool member spec: loss[:centers[:phi[:k]]], e.g. "triplet:9:0.5".
struct MemberSpec {
  forge::LossKind loss;
  std::size_t centers = 0;  // 0 keeps the subcommand default
  double phi = 0.0;         // 0 keeps the subcommand default
  std::size_t k = 0;
};

MemberSpec parse_member_spec(const std::string& text) {
  std::vector<std::string> parts;
  std::size_t pos = 0;
  while (true) {
    const std::size_t colon = text.find(':', pos);
    parts.push_back(text.substr(pos, colon - pos));
    if (colon == std::string::npos) break;
    pos = colon + 1;
  }
  if (parts.size() > 4) throw forge::InvalidConfig("member spec '" + text + "' has too many fields");
  MemberSpec spec{forge::loss_kind_from_string(parts[0])};
  try {
    if (parts.size() > 1 && !parts[1].empty()) spec.centers = std::stoul(parts[1]);
    if (parts.size() > 2 && !parts[2].empty()) spec.phi = std::stod(parts[2]);
    if (parts.size() > 3 && !parts[3].empty()) spec.k = std::stoul(parts[3]);
  } catch (const std::exception&) {
    throw forge::InvalidConfig("member spec '" + text + "' has a non-numeric field");
  }
  return spec;
}

ordered_json trace_to_json(const forge::RunTrace& trace) {
  ordered_json records = ordered_json::array();
  for (std::size_t g = 0; g < trace.generations.size(); ++g) {
    const forge::GenerationRecord& record = trace.generations[g];
    records.push_back({{"generation", g},
                       {"best_fitness", record.best_fitness},
                       {"mean_fitness", record.mean_fitness},
                       {"best_mask", record.best_mask.to_string()},
                       {"marginals", record.marginals}});
  }
  return records;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ensemble selection and fusion over classifier prediction tables"};
  app.require_subcommand(1);

  // diversity
  auto* diversity_cmd = app.add_subcommand("diversity", "pairwise correlation matrix of a pool");
  std::string div_table_path;
  std::string div_format = "csv";
  std::string div_out;
  diversity_cmd->add_option("table", div_table_path, "prediction table CSV")->required();
  diversity_cmd->add_option("--format", div_format, "csv or json")
      ->check(CLI::IsMember({"csv", "json"}));
  diversity_cmd->add_option("--out", div_out, "output file (default stdout)");

  // select
  auto* select_cmd = app.add_subcommand("select", "pick a classifier subset on validation data");
  std::string sel_manifest;
  int sel_fold = 0;
  std::size_t sel_lambda = 40;
  std::size_t sel_mu = 10;
  int sel_gens = 100;
  std::uint64_t sel_seed = 0;
  bool sel_no_clamp = false;
  std::string sel_out;
  select_cmd->add_option("--manifest", sel_manifest, "fold manifest JSON")->required();
  select_cmd->add_option("--fold", sel_fold, "fold id")->required();
  select_cmd->add_option("--lambda", sel_lambda, "population size");
  select_cmd->add_option("--mu", sel_mu, "selection size");
  select_cmd->add_option("--gens", sel_gens, "generations");
  select_cmd->add_option("--seed", sel_seed, "RNG seed")->envname("ENSEMBLE_FORGE_SEED");
  select_cmd->add_flag("--no-clamp", sel_no_clamp, "disable marginal clamping");
  select_cmd->add_option("--out", sel_out, "output file (default stdout)");

  // fuse
  auto* fuse_cmd = app.add_subcommand("fuse", "majority-vote a masked subset of a table");
  std::string fuse_table_path;
  std::string fuse_mask_spec;
  std::string fuse_labels_out;
  std::string fuse_summary_out;
  fuse_cmd->add_option("table", fuse_table_path, "prediction table CSV")->required();
  fuse_cmd->add_option("--mask", fuse_mask_spec, "bits (compact or comma-separated) or classifier names")
      ->required();
  fuse_cmd->add_option("--labels", fuse_labels_out, "labels CSV file (default stdout)");
  fuse_cmd->add_option("--summary", fuse_summary_out, "accuracy summary JSON file");

  // evaluate
  auto* eval_cmd = app.add_subcommand("evaluate", "full cross-fold comparison report");
  std::string eval_manifest;
  std::uint64_t eval_seed = 0;
  std::size_t eval_lambda = 40;
  std::size_t eval_mu = 10;
  std::size_t eval_gens = 100;
  bool eval_no_clamp = false;
  std::string eval_name = "dataset";
  std::vector<std::string> eval_baselines;
  std::string eval_format = "json";
  std::string eval_out;
  eval_cmd->add_option("--manifest", eval_manifest, "fold manifest JSON")->required();
  eval_cmd->add_option("--seed", eval_seed, "RNG seed")->envname("ENSEMBLE_FORGE_SEED");
  eval_cmd->add_option("--lambda", eval_lambda, "population size");
  eval_cmd->add_option("--mu", eval_mu, "selection size");
  eval_cmd->add_option("--gens", eval_gens, "generations");
  eval_cmd->add_flag("--no-clamp", eval_no_clamp, "disable marginal clamping");
  eval_cmd->add_option("--name", eval_name, "dataset name for the report");
  eval_cmd->add_option("--baseline", eval_baselines,
                       "NAME=VALUE reference accuracy as a fraction in (0,1] (repeatable)");
  eval_cmd->add_option("--format", eval_format, "json, csv, or markdown")
      ->check(CLI::IsMember({"json", "csv", "markdown", "md"}));
  eval_cmd->add_option("--out", eval_out, "output file (default stdout)");

  // report
  auto* report_cmd = app.add_subcommand("report", "re-render an evaluate report");
  std::string rep_in;
  std::string rep_format = "markdown";
  std::string rep_out;
  report_cmd->add_option("report", rep_in, "report file from evaluate (JSON or CSV)")->required();
  report_cmd->add_option("--format", rep_format, "json, csv, or markdown")
      ->check(CLI::IsMember({"json", "csv", "markdown", "md"}));
  report_cmd->add_option("--out", rep_out, "output file (default stdout)");

  // lab
  auto* lab_cmd = app.add_subcommand("lab", "desk-scale embedding lab");
  lab_cmd->require_subcommand(1);

  auto* gen_cmd = lab_cmd->add_subcommand("gen", "sample Gaussian blobs");
  std::vector<std::string> gen_means;
  double gen_stddev = 0.4;
  std::size_t gen_per_class = 20;
  std::uint64_t gen_seed = 0;
  std::string gen_out;
  gen_cmd->add_option("--mean", gen_means, "class mean as comma-separated coordinates (repeatable)")
      ->required();
  gen_cmd->add_option("--stddev", gen_stddev, "cluster standard deviation");
  gen_cmd->add_option("--per-class", gen_per_class, "samples per class");
  gen_cmd->add_option("--seed", gen_seed, "RNG seed")->envname("ENSEMBLE_FORGE_SEED");
  gen_cmd->add_option("--out", gen_out, "output file (default stdout)");

  auto* train_cmd = lab_cmd->add_subcommand("train", "descend a metric loss over embeddings");
  std::string train_data;
  std::string train_loss = "contrastive";
  forge::TrainConfig train_config;
  std::string train_out;
  std::string train_trace_out;
  bool train_no_normalize = false;
  train_cmd->add_option("--data", train_data, "embedding batch CSV")->required();
  train_cmd->add_option("--loss", train_loss,
                        "contrastive|triplet|nngk|proxy_anchor|softtriple|supcon");
  train_cmd->add_option("--lr", train_config.learning_rate, "learning rate");
  train_cmd->add_option("--steps", train_config.steps, "descent steps");
  train_cmd->add_option("--batch", train_config.batch_size, "minibatch size");
  train_cmd->add_option("--fd-step", train_config.fd_step, "finite-difference step");
  train_cmd->add_option("--seed", train_config.seed, "RNG seed")->envname("ENSEMBLE_FORGE_SEED");
  train_cmd->add_option("--margin", train_config.margin, "contrastive/triplet margin");
  train_cmd->add_option("--alpha", train_config.proxy_alpha, "proxy-anchor scale");
  train_cmd->add_option("--proxy-margin", train_config.proxy_margin, "proxy-anchor margin");
  train_cmd->add_option("--st-lambda", train_config.st_lambda, "softtriple scale");
  train_cmd->add_option("--st-gamma", train_config.st_gamma, "softtriple entropy factor");
  train_cmd->add_option("--st-margin", train_config.st_margin, "softtriple margin");
  train_cmd->add_option("--st-centers", train_config.st_centers, "softtriple centers per class");
  train_cmd->add_option("--tau", train_config.supcon_tau, "supcon temperature");
  train_cmd->add_option("--phi", train_config.nngk_phi, "kernel bandwidth");
  train_cmd->add_option("--k", train_config.nngk_k, "kernel neighbor count (0 = all)");
  train_cmd->add_flag("--no-normalize", train_no_normalize,
                      "skip L2 normalization in cosine losses");
  train_cmd->add_option("--out", train_out, "trained embeddings file (default stdout)");
  train_cmd->add_option("--trace", train_trace_out, "per-step loss CSV");

  auto* pool_cmd = lab_cmd->add_subcommand("pool", "train a pool and emit prediction tables");
  std::string pool_train_path;
  std::string pool_validation_path;
  std::string pool_test_path;
  std::vector<std::string> pool_specs;
  std::size_t pool_centers = 16;
  double pool_phi = 1.0;
  std::size_t pool_weight_steps = 0;
  double pool_lr = 0.05;
  std::size_t pool_steps = 200;
  std::size_t pool_batch = 16;
  std::uint64_t pool_seed = 0;
  int pool_fold = 0;
  std::string pool_out_dir = ".";
  std::string pool_manifest_out;
  bool pool_append = false;
  pool_cmd->add_option("--train", pool_train_path, "train batch CSV")->required();
  pool_cmd->add_option("--validation", pool_validation_path, "validation batch CSV")->required();
  pool_cmd->add_option("--test", pool_test_path, "test batch CSV")->required();
  pool_cmd->add_option("--spec", pool_specs, "member spec loss[:centers[:phi[:k]]] (repeatable)")
      ->required();
  pool_cmd->add_option("--centers", pool_centers, "default center count");
  pool_cmd->add_option("--phi", pool_phi, "default kernel bandwidth");
  pool_cmd->add_option("--weight-steps", pool_weight_steps, "center-weight refinement steps");
  pool_cmd->add_option("--lr", pool_lr, "trainer learning rate");
  pool_cmd->add_option("--steps", pool_steps, "trainer steps");
  pool_cmd->add_option("--batch", pool_batch, "trainer minibatch size");
  pool_cmd->add_option("--seed", pool_seed, "base RNG seed; member i uses seed+i")
      ->envname("ENSEMBLE_FORGE_SEED");
  pool_cmd->add_option("--fold", pool_fold, "fold id for file names and the manifest");
  pool_cmd->add_option("--out-dir", pool_out_dir, "directory for the three table CSVs");
  pool_cmd->add_option("--manifest-out", pool_manifest_out, "write a fold manifest here");
  pool_cmd->add_flag("--append", pool_append, "extend an existing manifest instead of replacing");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }

  try {
    if (*diversity_cmd) {
      const forge::PredictionTable table = forge::load_prediction_table(div_table_path);
      const forge::DiversityMatrix matrix = forge::diversity_matrix(table);
      write_output(div_format == "json" ? forge::diversity_to_json(matrix)
                                        : forge::diversity_to_csv(matrix),
                   div_out);
    } else if (*select_cmd) {
      const auto manifest = forge::load_manifest(sel_manifest);
      const forge::PredictionTable validation = forge::load_prediction_table(
          forge::find_table(manifest, sel_fold, forge::Split::validation));

      forge::UmdaConfig config;
      config.n = validation.pool_size();
      config.lambda = sel_lambda;
      config.mu = sel_mu;
      config.generations = sel_gens;
      config.seed = sel_seed;
      config.clamp = !sel_no_clamp;
      const forge::RunTrace trace = forge::run_umda(config, forge::ensemble_fitness(validation));

      ordered_json doc;
      doc["fold"] = sel_fold;
      doc["mask"] = trace.best_mask.to_string();
      ordered_json selected = ordered_json::array();
      for (std::size_t i = 0; i < validation.pool_size(); ++i) {
        if (trace.best_mask.bits[i]) selected.push_back(validation.classifier_names[i]);
      }
      doc["selected"] = selected;
      doc["validation_fitness"] = trace.best_fitness;
      doc["config"] = {{"lambda", config.lambda},
                       {"mu", config.mu},
                       {"generations", config.generations},
                       {"seed", config.seed},
                       {"clamp", config.clamp}};
      doc["trace"] = trace_to_json(trace);
      write_output(doc.dump(2) + "\n", sel_out);
    } else if (*fuse_cmd) {
      const forge::PredictionTable table = forge::load_prediction_table(fuse_table_path);
      const forge::EnsembleMask mask = parse_mask_spec(fuse_mask_spec, table);
      const std::vector<forge::LabelId> labels = forge::majority_vote(table, mask);
      const double accuracy = forge::ensemble_accuracy(table, mask);

      std::string labels_csv = "sample_id,label\n";
      for (std::size_t j = 0; j < labels.size(); ++j) {
        labels_csv += std::to_string(table.sample_ids[j]);
        labels_csv += ',';
        labels_csv += std::to_string(labels[j]);
        labels_csv += '\n';
      }
      write_output(labels_csv, fuse_labels_out);

      if (!fuse_summary_out.empty()) {
        ordered_json summary;
        summary["table"] = fuse_table_path;
        summary["mask"] = mask.to_string();
        ordered_json names = ordered_json::array();
        for (std::size_t i = 0; i < table.pool_size(); ++i) {
          if (mask.bits[i]) names.push_back(table.classifier_names[i]);
        }
        summary["selected"] = names;
        summary["samples"] = table.sample_count();
        summary["accuracy"] = accuracy;
        write_output(summary.dump(2) + "\n", fuse_summary_out);
      }
      std::fprintf(stderr, "accuracy %.6f over %zu samples with %zu of %zu classifiers\n",
                   accuracy, table.sample_count(), mask.popcount(), table.pool_size());
    } else if (*eval_cmd) {
      forge::ExperimentConfig config;
      config.dataset_name = eval_name;
      config.lambda = eval_lambda;
      config.mu = eval_mu;
      config.generations = eval_gens;
      config.clamp = !eval_no_clamp;
      config.seed = eval_seed;
      config.extra_baselines = parse_baselines(eval_baselines);
      const auto manifest = forge::load_manifest(eval_manifest);
      const forge::ExperimentReport report = forge::run_experiment(manifest, config);
      write_output(forge::emit_report(report, report_format_from_string(eval_format)), eval_out);
    } else if (*report_cmd) {
      const std::string text = read_input(rep_in);
      const forge::ExperimentReport report = text.rfind("key,value", 0) == 0
                                                 ? forge::parse_report_csv(text)
                                                 : forge::parse_report_json(text);
      write_output(forge::emit_report(report, report_format_from_string(rep_format)), rep_out);
    } else if (*gen_cmd) {
      forge::BlobSpec spec;
      for (const std::string& mean : gen_means) spec.class_means.push_back(parse_point(mean));
      spec.stddev = gen_stddev;
      spec.samples_per_class = gen_per_class;
      spec.seed = gen_seed;
      write_output(forge::format_embedding_batch(forge::generate_blobs(spec)), gen_out);
    } else if (*train_cmd) {
      const forge::EmbeddingBatch data = forge::load_embedding_batch(train_data);
      train_config.loss = forge::loss_kind_from_string(train_loss);
      train_config.normalize = !train_no_normalize;
      std::vector<double> trace;
      const std::vector<forge::Embedding> trained =
          forge::train_embeddings(data, train_config, &trace);
      write_output(forge::format_embedding_batch({trained, data.labels}), train_out);
      if (!train_trace_out.empty()) {
        std::string trace_csv = "step,loss\n";
        char buffer[64];
        for (std::size_t s = 0; s < trace.size(); ++s) {
          std::snprintf(buffer, sizeof buffer, "%zu,%.17g\n", s, trace[s]);
          trace_csv += buffer;
        }
        write_output(trace_csv, train_trace_out);
      }
    } else if (*pool_cmd) {
      const forge::EmbeddingBatch train_batch = forge::load_embedding_batch(pool_train_path);
      const forge::EmbeddingBatch validation_batch =
          forge::load_embedding_batch(pool_validation_path);
      const forge::EmbeddingBatch test_batch = forge::load_embedding_batch(pool_test_path);

      std::vector<forge::PoolSpec> members;
      for (std::size_t i = 0; i < pool_specs.size(); ++i) {
        const MemberSpec parsed = parse_member_spec(pool_specs[i]);
        forge::PoolSpec member;
        member.train.loss = parsed.loss;
        member.train.learning_rate = pool_lr;
        member.train.steps = pool_steps;
        member.train.batch_size = pool_batch;
        member.train.seed = pool_seed + i;
        member.nngk.num_centers = parsed.centers ? parsed.centers : pool_centers;
        member.nngk.phi = parsed.phi > 0.0 ? parsed.phi : pool_phi;
        member.nngk.k = parsed.k;
        member.nngk.weight_steps = pool_weight_steps;
        member.nngk.seed = pool_seed + i;
        members.push_back(std::move(member));
      }

      const forge::PoolTables tables =
          forge::build_pool(members, train_batch, validation_batch, test_batch);
      const std::filesystem::path dir(pool_out_dir);
      std::filesystem::create_directories(dir);
      const std::string stem = "fold" + std::to_string(pool_fold) + "_";
      std::vector<forge::FoldManifest> entries;
      const auto emit = [&](const forge::PredictionTable& table, forge::Split split) {
        const std::filesystem::path path = dir / (stem + forge::to_string(split) + ".csv");
        forge::save_prediction_table(table, path);
        entries.push_back({pool_fold, split, path});
        std::fprintf(stderr, "wrote %s\n", path.string().c_str());
      };
      emit(tables.train, forge::Split::train);
      emit(tables.validation, forge::Split::validation);
      emit(tables.test, forge::Split::test);

      if (!pool_manifest_out.empty()) {
        if (pool_append && std::filesystem::exists(pool_manifest_out)) {
          std::vector<forge::FoldManifest> existing = forge::load_manifest(pool_manifest_out);
          existing.insert(existing.end(), entries.begin(), entries.end());
          entries = std::move(existing);
        }
        forge::save_manifest(entries, pool_manifest_out);
      }
    }
    return 0;
  } catch (const forge::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const forge::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

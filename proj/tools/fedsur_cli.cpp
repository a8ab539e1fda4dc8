/*
 * Copyright (c) 2026, The fedsur Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Command-line front end: run, sweep and ablate.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "fedsur/errors.hpp"
#include "fedsur/harness.hpp"

namespace {

using fedsur::ExperimentConfig;
using fedsur::ReportFormat;
using fedsur::RunReport;

struct CommonArgs {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string format = "csv";
  std::string out;
  int threads = 0;
  bool serial = false;
  // Shorthand flags, applied through the same path as --set.
  std::vector<std::pair<std::string, std::optional<std::string>>> shorthand = {
      {"n_clients", {}}, {"mcr", {}},    {"pdr", {}},     {"alpha", {}},          {"rounds", {}},
      {"seed", {}},      {"attack", {}}, {"defense", {}}, {"zeta", {}},           {"donor_metric", {}},
      {"lr", {}},        {"batch", {}},  {"benign_epochs", {}}, {"malicious_epochs", {}},
  };
};

void add_common(CLI::App* app, CommonArgs& args) {
  app->add_option("-c,--config", args.config_path, "JSON config file")->check(CLI::ExistingFile);
  app->add_option("-s,--set", args.overrides, "Override a field: name=value (alias or JSON pointer)");
  app->add_option("-f,--format", args.format, "Report format")->check(CLI::IsMember({"csv", "json"}));
  app->add_option("-o,--out", args.out, "Output path (run) or file prefix (sweep, ablate)");
  app->add_option("-j,--threads", args.threads, "OpenMP threads for client training (0 = default)");
  app->add_flag("--serial", args.serial, "Use the single-threaded reference trainer");
  for (auto& [name, value] : args.shorthand) {
    std::string flag = "--" + name;
    for (auto& ch : flag) {
      if (ch == '_') ch = '-';
    }
    app->add_option(flag, value, "Sets " + name);
  }
}

ExperimentConfig build_config(const CommonArgs& args) {
  ExperimentConfig cfg;
  if (!args.config_path.empty()) {
    std::ifstream in(args.config_path);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw fedsur::ConfigError(args.config_path + ": " + e.what());
    }
    cfg = fedsur::config_from_json(j);
  }
  for (const auto& [name, value] : args.shorthand) {
    if (value) cfg = fedsur::with_parameter(cfg, name, *value);
  }
  for (const auto& ov : args.overrides) {
    const auto eq = ov.find('=');
    if (eq == std::string::npos || eq == 0) throw fedsur::ConfigError("--set expects name=value, got '" + ov + "'");
    cfg = fedsur::with_parameter(cfg, ov.substr(0, eq), ov.substr(eq + 1));
  }
  cfg.validate();
  return cfg;
}

ReportFormat format_of(const CommonArgs& args) {
  return args.format == "json" ? ReportFormat::json : ReportFormat::csv;
}

std::filesystem::path default_path(const std::string& stem, const CommonArgs& args) {
  return fedsur::output_directory(".") / (stem + "." + args.format);
}

std::string sanitize(std::string s) {
  for (auto& ch : s) {
    if (!std::isalnum(static_cast<unsigned char>(ch)) && ch != '.' && ch != '-' && ch != '_') ch = '_';
  }
  return s;
}

void summarize(const RunReport& r, const std::filesystem::path& path) {
  auto show = [](const std::optional<double>& v) { return v ? std::to_string(*v) : std::string("nan"); };
  std::cout << (r.label.empty() ? "run" : r.label) << ": mta=" << r.final_mta() << " asr=" << r.final_asr()
            << " tpr=" << show(r.tpr) << " fpr=" << show(r.fpr) << " mcc=" << r.mcc << " -> " << path.string()
            << '\n';
  for (const auto& w : r.warnings) std::cerr << "warning: " << w << '\n';
}

void write_all(const std::vector<RunReport>& reports, const std::string& stem, const CommonArgs& args) {
  for (const auto& r : reports) {
    const std::string name = stem + "_" + sanitize(r.label);
    std::filesystem::path path;
    if (args.out.empty()) {
      path = default_path(name, args);
    } else {
      path = args.out + "_" + sanitize(r.label) + "." + args.format;
    }
    fedsur::emit_report(r, path, format_of(args));
    summarize(r, path);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"FedSurrogate federated backdoor-defense simulator"};
  app.require_subcommand(1);

  CommonArgs run_args;
  auto* run = app.add_subcommand("run", "Run one experiment");
  add_common(run, run_args);

  CommonArgs sweep_args;
  std::string parameter;
  std::vector<std::string> values;
  auto* sw = app.add_subcommand("sweep", "Run one experiment per parameter value");
  add_common(sw, sweep_args);
  sw->add_option("-p,--param", parameter, "Parameter alias or JSON pointer")->required();
  sw->add_option("-v,--values", values, "Values to sweep")->required()->delimiter(',');

  CommonArgs ablate_args;
  auto* ab = app.add_subcommand("ablate", "Run the four stage-ablation variants");
  add_common(ab, ablate_args);

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      const auto cfg = build_config(run_args);
      const auto report = fedsur::run_experiment(cfg, {run_args.threads, run_args.serial, {}});
      const std::filesystem::path path = run_args.out.empty() ? default_path("fedsur_run", run_args) : std::filesystem::path(run_args.out);
      fedsur::emit_report(report, path, format_of(run_args));
      summarize(report, path);
    } else if (sw->parsed()) {
      const auto cfg = build_config(sweep_args);
      const auto reports = fedsur::sweep(cfg, parameter, values, {sweep_args.threads, sweep_args.serial, {}});
      write_all(reports, "fedsur_sweep", sweep_args);
    } else if (ab->parsed()) {
      const auto cfg = build_config(ablate_args);
      const auto reports = fedsur::ablate(cfg, {ablate_args.threads, ablate_args.serial, {}});
      write_all(reports, "fedsur_ablate", ablate_args);
    }
  } catch (const fedsur::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid argument: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

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

#include "fedsur/harness.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "fedsur/errors.hpp"
#include "fedsur/rng.hpp"
#include "fedsur/simulation.hpp"

namespace fedsur {

using nlohmann::json;

std::string to_string(DefenseKind kind) { return kind == DefenseKind::fedsurrogate ? "fedsurrogate" : "fedavg"; }

DefenseKind defense_kind_from_string(const std::string& name) {
  if (name == "fedsurrogate") return DefenseKind::fedsurrogate;
  if (name == "fedavg") return DefenseKind::fedavg;
  throw ConfigError("unknown defense '" + name + "'");
}

int ExperimentConfig::malicious_count() const { return static_cast<int>(floor_fraction(mcr, n_clients)); }

void ExperimentConfig::validate() const {
  if (n_clients < 2) throw ConfigError("n_clients must be >= 2");
  if (!(mcr >= 0.0 && mcr < 1.0)) throw ConfigError("mcr must be in [0, 1)");
  if (!(pdr >= 0.0 && pdr <= 1.0)) throw ConfigError("pdr must be in [0, 1]");
  if (!(alpha > 0.0)) throw ConfigError("alpha must be positive");
  if (rounds < 1) throw ConfigError("rounds must be positive");
  if (benign_epochs < 1) throw ConfigError("benign_epochs must be positive");
  if (!(lr > 0.0)) throw ConfigError("lr must be positive");
  if (batch < 1) throw ConfigError("batch must be positive");
  if (hidden.empty()) throw ConfigError("hidden must list at least one layer width");
  for (auto h : hidden) {
    if (h == 0) throw ConfigError("hidden widths must be positive");
  }
  if (dataset.source == DatasetSource::synthetic) {
    if (dataset.num_classes < 2) throw ConfigError("dataset.num_classes must be >= 2");
    if (dataset.dim == 0 || dataset.train_per_class == 0 || dataset.test_per_class == 0) {
      throw ConfigError("dataset sizes must be positive");
    }
    if (!(dataset.spread >= 0.0)) throw ConfigError("dataset.spread must be non-negative");
  } else if (dataset.train_images.empty() || dataset.train_labels.empty() || dataset.test_images.empty() ||
             dataset.test_labels.empty()) {
    throw ConfigError("idx dataset needs train/test image and label paths");
  }
  attack.validate(hidden.size() + 1);
  defense_cfg.lca.validate();
  defense_cfg.weights.validate();
  if (!(defense_cfg.filter.zeta > 0.0 && defense_cfg.filter.zeta <= 1.0)) throw ConfigError("zeta must be in (0, 1]");
  if (defense_cfg.cluster.min_samples < 1) throw ConfigError("min_samples must be >= 1");
  if (defense_cfg.cluster.min_cluster_size < 0) throw ConfigError("min_cluster_size must be >= 0");
  if (attack.trigger.fragments < 0) throw ConfigError("trigger fragments must be >= 0");
}

// ---------------------------------------------------------------------------
// JSON

namespace {

template <typename T>
void read(const json& j, const char* key, T& field) {
  if (auto it = j.find(key); it != j.end()) field = it->get<T>();
}

void check_keys(const json& j, std::initializer_list<const char*> known, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  std::set<std::string> allowed(known.begin(), known.end());
  for (const auto& [key, value] : j.items()) {
    if (!allowed.contains(key)) throw ConfigError("unknown config key '" + where + key + "'");
  }
}

json trigger_json(const TriggerSpec& t) {
  return {{"patch_coords", t.patch_coords},
          {"patch_value", t.patch_value},
          {"target_label", t.target_label},
          {"fragments", t.fragments}};
}

}  // namespace

json to_json(const ExperimentConfig& c) {
  const auto& d = c.defense_cfg;
  json ds = {{"source", c.dataset.source == DatasetSource::synthetic ? "synthetic" : "idx"},
             {"num_classes", c.dataset.num_classes},
             {"dim", c.dataset.dim},
             {"train_per_class", c.dataset.train_per_class},
             {"test_per_class", c.dataset.test_per_class},
             {"spread", c.dataset.spread},
             {"train_images", c.dataset.train_images},
             {"train_labels", c.dataset.train_labels},
             {"test_images", c.dataset.test_images},
             {"test_labels", c.dataset.test_labels},
             {"max_train", c.dataset.max_train},
             {"max_test", c.dataset.max_test}};
  return {
      {"n_clients", c.n_clients},
      {"mcr", c.mcr},
      {"pdr", c.pdr},
      {"alpha", c.alpha},
      {"rounds", c.rounds},
      {"benign_epochs", c.benign_epochs},
      {"lr", c.lr},
      {"batch", c.batch},
      {"hidden", c.hidden},
      {"seed", c.seed},
      {"attack",
       {{"kind", to_string(c.attack.kind)},
        {"trigger", trigger_json(c.attack.trigger)},
        {"malicious_epochs", c.attack.malicious_epochs},
        {"neurotoxin_ratio", c.attack.neurotoxin_ratio},
        {"csa_lambda", c.attack.csa_lambda},
        {"csa_grad_clip", c.attack.csa_grad_clip},
        {"cla_top_k", c.attack.cla_top_k}}},
      {"defense", to_string(c.defense)},
      {"defense_cfg",
       {{"lca", {{"top_k", d.lca.top_k}, {"sigma", d.lca.sigma}, {"mode", to_string(d.lca.mode)}}},
        {"filter",
         {{"zeta", d.filter.zeta},
          {"orientation", to_string(d.filter.orientation)},
          {"iqr_multiplier", d.filter.iqr_multiplier}, {"rescue_layers", d.filter.rescue_layers}}},
        {"weights", {{"trusted", d.weights.trusted}, {"rescued", d.weights.rescued}, {"surrogate", d.weights.surrogate}}},
        {"cluster", {{"min_samples", d.cluster.min_samples}, {"min_cluster_size", d.cluster.min_cluster_size}}},
        {"donor_metric", to_string(d.donor_metric)},
        {"stages",
         {{"screen_trusted", d.stages.screen_trusted}, {"rescue", d.stages.rescue}, {"surrogate", d.stages.surrogate}}}}},
      {"dataset", ds},
  };
}

ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig c;
  try {
    check_keys(j,
               {"n_clients", "mcr", "pdr", "alpha", "rounds", "benign_epochs", "lr", "batch", "hidden", "seed", "attack",
                "defense", "defense_cfg", "dataset"},
               "");
    read(j, "n_clients", c.n_clients);
    read(j, "mcr", c.mcr);
    read(j, "pdr", c.pdr);
    read(j, "alpha", c.alpha);
    read(j, "rounds", c.rounds);
    read(j, "benign_epochs", c.benign_epochs);
    read(j, "lr", c.lr);
    read(j, "batch", c.batch);
    read(j, "hidden", c.hidden);
    read(j, "seed", c.seed);
    if (auto it = j.find("defense"); it != j.end()) c.defense = defense_kind_from_string(it->get<std::string>());

    if (auto a = j.find("attack"); a != j.end()) {
      check_keys(*a, {"kind", "trigger", "malicious_epochs", "neurotoxin_ratio", "csa_lambda", "csa_grad_clip", "cla_top_k"},
                 "attack/");
      if (auto k = a->find("kind"); k != a->end()) c.attack.kind = attack_kind_from_string(k->get<std::string>());
      read(*a, "malicious_epochs", c.attack.malicious_epochs);
      read(*a, "neurotoxin_ratio", c.attack.neurotoxin_ratio);
      read(*a, "csa_lambda", c.attack.csa_lambda);
      read(*a, "csa_grad_clip", c.attack.csa_grad_clip);
      read(*a, "cla_top_k", c.attack.cla_top_k);
      if (auto t = a->find("trigger"); t != a->end()) {
        check_keys(*t, {"patch_coords", "patch_value", "target_label", "fragments"}, "attack/trigger/");
        read(*t, "patch_coords", c.attack.trigger.patch_coords);
        read(*t, "patch_value", c.attack.trigger.patch_value);
        read(*t, "target_label", c.attack.trigger.target_label);
        read(*t, "fragments", c.attack.trigger.fragments);
      }
    }

    if (auto d = j.find("defense_cfg"); d != j.end()) {
      check_keys(*d, {"lca", "filter", "weights", "cluster", "donor_metric", "stages"}, "defense_cfg/");
      auto& dc = c.defense_cfg;
      if (auto x = d->find("lca"); x != d->end()) {
        check_keys(*x, {"top_k", "sigma", "mode"}, "defense_cfg/lca/");
        read(*x, "top_k", dc.lca.top_k);
        read(*x, "sigma", dc.lca.sigma);
        if (auto m = x->find("mode"); m != x->end()) dc.lca.mode = lca_mode_from_string(m->get<std::string>());
      }
      if (auto x = d->find("filter"); x != d->end()) {
        check_keys(*x, {"zeta", "orientation", "iqr_multiplier", "rescue_layers"}, "defense_cfg/filter/");
        read(*x, "zeta", dc.filter.zeta);
        if (auto o = x->find("orientation"); o != x->end()) {
          dc.filter.orientation = score_orientation_from_string(o->get<std::string>());
        }
        read(*x, "iqr_multiplier", dc.filter.iqr_multiplier);
        read(*x, "rescue_layers", dc.filter.rescue_layers);
      }
      if (auto x = d->find("weights"); x != d->end()) {
        check_keys(*x, {"trusted", "rescued", "surrogate"}, "defense_cfg/weights/");
        read(*x, "trusted", dc.weights.trusted);
        read(*x, "rescued", dc.weights.rescued);
        read(*x, "surrogate", dc.weights.surrogate);
      }
      if (auto x = d->find("cluster"); x != d->end()) {
        check_keys(*x, {"min_samples", "min_cluster_size"}, "defense_cfg/cluster/");
        read(*x, "min_samples", dc.cluster.min_samples);
        read(*x, "min_cluster_size", dc.cluster.min_cluster_size);
      }
      if (auto m = d->find("donor_metric"); m != d->end()) {
        dc.donor_metric = donor_metric_from_string(m->get<std::string>());
      }
      if (auto x = d->find("stages"); x != d->end()) {
        check_keys(*x, {"screen_trusted", "rescue", "surrogate"}, "defense_cfg/stages/");
        read(*x, "screen_trusted", dc.stages.screen_trusted);
        read(*x, "rescue", dc.stages.rescue);
        read(*x, "surrogate", dc.stages.surrogate);
      }
    }

    if (auto x = j.find("dataset"); x != j.end()) {
      check_keys(*x,
                 {"source", "num_classes", "dim", "train_per_class", "test_per_class", "spread", "train_images",
                  "train_labels", "test_images", "test_labels", "max_train", "max_test"},
                 "dataset/");
      auto& ds = c.dataset;
      if (auto s = x->find("source"); s != x->end()) {
        const auto name = s->get<std::string>();
        if (name == "synthetic") {
          ds.source = DatasetSource::synthetic;
        } else if (name == "idx") {
          ds.source = DatasetSource::idx;
        } else {
          throw ConfigError("unknown dataset source '" + name + "'");
        }
      }
      read(*x, "num_classes", ds.num_classes);
      read(*x, "dim", ds.dim);
      read(*x, "train_per_class", ds.train_per_class);
      read(*x, "test_per_class", ds.test_per_class);
      read(*x, "spread", ds.spread);
      read(*x, "train_images", ds.train_images);
      read(*x, "train_labels", ds.train_labels);
      read(*x, "test_images", ds.test_images);
      read(*x, "test_labels", ds.test_labels);
      read(*x, "max_train", ds.max_train);
      read(*x, "max_test", ds.max_test);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return c;
}

std::string config_hash(const ExperimentConfig& cfg) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : to_json(cfg).dump()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

json tally_json(const DetectionTally& t) { return {{"tp", t.tp}, {"fp", t.fp}, {"tn", t.tn}, {"fn", t.fn}}; }

DetectionTally tally_from(const json& j) {
  return {j.at("tp").get<std::uint64_t>(), j.at("fp").get<std::uint64_t>(), j.at("tn").get<std::uint64_t>(),
          j.at("fn").get<std::uint64_t>()};
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> optional_from(const json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

}  // namespace

json to_json(const RunReport& r) {
  json rounds = json::array();
  for (const auto& rr : r.rounds) {
    rounds.push_back({{"round", rr.round},
                      {"mta", rr.mta},
                      {"asr", rr.asr},
                      {"n_flagged", rr.n_flagged},
                      {"n_rescued", rr.n_rescued},
                      {"degenerate", rr.degenerate},
                      {"critical_layers", rr.critical_layers},
                      {"detection", tally_json(rr.detection)}});
  }
  return {{"config", r.config},
          {"config_hash", r.config_hash},
          {"seed", r.seed},
          {"label", r.label},
          {"rounds", rounds},
          {"detection", tally_json(r.detection)},
          {"tpr", optional_json(r.tpr)},
          {"fpr", optional_json(r.fpr)},
          {"mcc", r.mcc},
          {"wall_clock_seconds", r.wall_clock_seconds},
          {"warnings", r.warnings}};
}

RunReport report_from_json(const json& j) {
  RunReport r;
  r.config = j.at("config");
  r.config_hash = j.at("config_hash").get<std::string>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.label = j.at("label").get<std::string>();
  for (const auto& rr : j.at("rounds")) {
    RoundRecord rec;
    rec.round = rr.at("round").get<int>();
    rec.mta = rr.at("mta").get<double>();
    rec.asr = rr.at("asr").get<double>();
    rec.n_flagged = rr.at("n_flagged").get<int>();
    rec.n_rescued = rr.at("n_rescued").get<int>();
    rec.degenerate = rr.at("degenerate").get<bool>();
    rec.critical_layers = rr.at("critical_layers").get<std::vector<std::string>>();
    rec.detection = tally_from(rr.at("detection"));
    r.rounds.push_back(std::move(rec));
  }
  r.detection = tally_from(j.at("detection"));
  r.tpr = optional_from(j.at("tpr"));
  r.fpr = optional_from(j.at("fpr"));
  r.mcc = j.at("mcc").get<double>();
  r.wall_clock_seconds = j.at("wall_clock_seconds").get<double>();
  r.warnings = j.at("warnings").get<std::vector<std::string>>();
  return r;
}

// ---------------------------------------------------------------------------
// Experiment loop

namespace {

struct Federation {
  Dataset train;
  Dataset test;
  std::vector<std::vector<Sample>> clean;
  std::vector<std::vector<Sample>> mixed;
  std::vector<Role> roles;
};

Dataset truncate(Dataset ds, std::size_t max) {
  if (max > 0 && ds.samples.size() > max) ds.samples.resize(max);
  return ds;
}

std::pair<Dataset, Dataset> load_dataset(const ExperimentConfig& cfg) {
  const auto& spec = cfg.dataset;
  if (spec.source == DatasetSource::synthetic) {
    auto all = generate_synthetic(spec.num_classes, spec.dim, spec.train_per_class + spec.test_per_class, spec.spread,
                                  derive_seed(cfg.seed, {tag(Stream::data)}));
    return split_per_class(all, spec.train_per_class);
  }
  return {truncate(load_idx(spec.train_images, spec.train_labels), spec.max_train),
          truncate(load_idx(spec.test_images, spec.test_labels), spec.max_test)};
}

// Fills in the defaults that depend on the data and the client split.
ExperimentConfig resolve(ExperimentConfig cfg, std::size_t dim, int num_classes, const LayerSchema& schema) {
  auto& trigger = cfg.attack.trigger;
  if (trigger.patch_coords.empty()) trigger.patch_coords = default_trigger(dim).patch_coords;
  if (trigger.fragments == 0) trigger.fragments = std::clamp(cfg.malicious_count(), 1, 4);
  trigger.fragments = std::min<int>(trigger.fragments, static_cast<int>(trigger.patch_coords.size()));
  trigger.validate(dim, num_classes);
  cfg.defense_cfg.filter.rescue_layers = cfg.defense_cfg.filter.resolved_rescue_layers(schema);
  cfg.defense_cfg.filter.validate(schema);
  if (cfg.dataset.source == DatasetSource::synthetic) cfg.dataset.dim = dim;
  return cfg;
}

}  // namespace

RunReport run_experiment(const ExperimentConfig& input, const RunOptions& opts) {
  const auto started = std::chrono::steady_clock::now();
  input.validate();

  auto [train, test] = load_dataset(input);
  std::vector<std::size_t> dims{train.dim};
  dims.insert(dims.end(), input.hidden.begin(), input.hidden.end());
  dims.push_back(static_cast<std::size_t>(train.num_classes));
  const MlpArchitecture arch(dims);
  const ExperimentConfig cfg = resolve(input, train.dim, train.num_classes, *arch.schema());

  RunReport report;
  report.config = to_json(cfg);
  report.config_hash = config_hash(cfg);
  report.seed = cfg.seed;
  if (cfg.honest_majority_violated()) {
    report.warnings.push_back("honest-majority assumption violated: " + std::to_string(cfg.malicious_count()) +
                              " of " + std::to_string(cfg.n_clients) + " clients are malicious");
  }

  const auto plan = dirichlet_partition(train, cfg.n_clients, cfg.alpha, derive_seed(cfg.seed, {tag(Stream::partition)}));
  const int n = cfg.n_clients;
  const int n_malicious = cfg.malicious_count();
  const bool attacking = cfg.attack.kind != AttackKind::none && n_malicious > 0;

  Federation fed;
  fed.roles.assign(static_cast<std::size_t>(n), Role::benign);
  for (int i = 0; i < n; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    fed.clean.push_back(train.subset(plan.client_indices[idx]).samples);
    if (attacking && i < n_malicious) fed.roles[idx] = Role::malicious;
  }
  fed.mixed.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n_malicious && attacking; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    if (cfg.attack.kind != AttackKind::dba) {
      fed.mixed[idx] = poison_partition(fed.clean[idx], cfg.pdr, cfg.attack.trigger, std::nullopt,
                                        derive_seed(cfg.seed, {tag(Stream::poison), static_cast<std::uint64_t>(i)}));
    }
  }

  std::vector<ClientTask> tasks;
  for (int i = 0; i < n; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    ClientTask t;
    t.client_id = i;
    t.role = fed.roles[idx];
    t.adversary_index = t.role == Role::malicious ? i : -1;
    t.clean = fed.clean[idx];
    t.mixed = fed.mixed[idx];
    tasks.push_back(t);
  }

  ParameterVector global = init_model(arch, derive_seed(cfg.seed, {tag(Stream::init)}));
  std::optional<ParameterVector> last_global_delta;
  ScoreMemory memory;

  for (int r = 0; r < cfg.rounds; ++r) {
    RoundPlan rp;
    rp.arch = &arch;
    rp.global = &global;
    rp.attack = &cfg.attack;
    rp.benign = {cfg.benign_epochs, cfg.lr, cfg.batch, 0};
    rp.malicious = {cfg.attack.malicious_epochs, cfg.lr, cfg.batch, 0};
    rp.pdr = cfg.pdr;
    rp.master_seed = cfg.seed;
    rp.round = r;
    if (attacking && cfg.attack.kind == AttackKind::neurotoxin) {
      rp.neurotoxin_mask = neurotoxin_mask(last_global_delta, cfg.attack.neurotoxin_ratio, arch.param_count());
    }

    auto models = opts.serial ? train_clients_serial(rp, tasks) : train_clients(rp, tasks, opts.threads);

    std::vector<ClientUpdate> updates;
    updates.reserve(models.size());
    for (int i = 0; i < n; ++i) {
      const auto idx = static_cast<std::size_t>(i);
      updates.push_back(make_client_update(i, std::move(models[idx]), global,
                                           static_cast<int>(fed.clean[idx].size()), fed.roles[idx]));
    }

    RoundRecord rec;
    rec.round = r + 1;
    ParameterVector next;
    std::vector<int> flagged;
    if (cfg.defense == DefenseKind::fedavg) {
      std::vector<ParameterVector> ms;
      std::vector<int> counts;
      for (const auto& u : updates) {
        ms.push_back(u.model);
        counts.push_back(u.sample_count);
      }
      next = fedavg_aggregate(ms, counts);
    } else {
      ScoreMemory updated;
      auto outcome = fedsurrogate_round(updates, global, memory, cfg.defense_cfg, updated);
      memory = std::move(updated);
      if (opts.observer) opts.observer(r + 1, outcome);
      flagged = outcome.confirmed_malicious;
      rec.n_rescued = static_cast<int>(outcome.rescued.size());
      rec.degenerate = outcome.degenerate;
      rec.critical_layers = outcome.critical_layers;
      next = std::move(outcome.global_after);
    }
    rec.n_flagged = static_cast<int>(flagged.size());
    rec.detection = tally_round({}, flagged, fed.roles);
    report.detection += rec.detection;

    last_global_delta = compute_update(next, global);
    global = std::move(next);
    rec.mta = evaluate(arch, global, test.samples);
    rec.asr = asr(arch, global, test.samples, cfg.attack.trigger);
    report.rounds.push_back(std::move(rec));
  }

  try {
    const auto rr = rates(report.detection);
    report.tpr = rr.tpr;
    report.fpr = rr.fpr;
  } catch (const UndefinedMetricError&) {
    if (report.detection.fp + report.detection.tn > 0) {
      report.fpr = static_cast<double>(report.detection.fp) /
                   static_cast<double>(report.detection.fp + report.detection.tn);
    }
  }
  report.mcc = mcc(report.detection);
  report.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return report;
}

// ---------------------------------------------------------------------------
// Sweeps and ablation

namespace {

const std::map<std::string, std::string>& parameter_aliases() {
  static const std::map<std::string, std::string> aliases = {
      {"n_clients", "/n_clients"},
      {"mcr", "/mcr"},
      {"pdr", "/pdr"},
      {"alpha", "/alpha"},
      {"rounds", "/rounds"},
      {"seed", "/seed"},
      {"lr", "/lr"},
      {"batch", "/batch"},
      {"benign_epochs", "/benign_epochs"},
      {"attack", "/attack/kind"},
      {"malicious_epochs", "/attack/malicious_epochs"},
      {"neurotoxin_ratio", "/attack/neurotoxin_ratio"},
      {"csa_lambda", "/attack/csa_lambda"},
      {"csa_grad_clip", "/attack/csa_grad_clip"},
      {"cla_top_k", "/attack/cla_top_k"},
      {"fragments", "/attack/trigger/fragments"},
      {"defense", "/defense"},
      {"zeta", "/defense_cfg/filter/zeta"},
      {"orientation", "/defense_cfg/filter/orientation"},
      {"iqr_multiplier", "/defense_cfg/filter/iqr_multiplier"},
      {"lca_top_k", "/defense_cfg/lca/top_k"},
      {"gamma_s", "/defense_cfg/weights/rescued"},
      {"gamma_r", "/defense_cfg/weights/surrogate"},
      {"min_samples", "/defense_cfg/cluster/min_samples"},
      {"donor_metric", "/defense_cfg/donor_metric"},
      {"spread", "/dataset/spread"},
  };
  return aliases;
}

}  // namespace

ExperimentConfig with_parameter(const ExperimentConfig& cfg, const std::string& name, const std::string& value) {
  std::string pointer;
  if (auto it = parameter_aliases().find(name); it != parameter_aliases().end()) {
    pointer = it->second;
  } else if (!name.empty() && name.front() == '/') {
    pointer = name;
  } else {
    throw ConfigError("unknown sweep parameter '" + name + "'");
  }
  json j = to_json(cfg);
  const json::json_pointer ptr(pointer);
  if (!j.contains(ptr)) throw ConfigError("unknown config field '" + pointer + "'");
  json parsed;
  try {
    parsed = json::parse(value);
  } catch (const json::exception&) {
    parsed = value;
  }
  j[ptr] = parsed;
  return config_from_json(j);
}

std::vector<RunReport> sweep(const ExperimentConfig& cfg, const std::string& parameter,
                             const std::vector<std::string>& values, const RunOptions& opts) {
  std::vector<ExperimentConfig> configs;
  for (const auto& v : values) configs.push_back(with_parameter(cfg, parameter, v));
  std::vector<RunReport> out;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    auto report = run_experiment(configs[i], opts);
    report.label = parameter + "=" + values[i];
    out.push_back(std::move(report));
  }
  return out;
}

std::vector<ExperimentConfig> ablation_variants(const ExperimentConfig& cfg) {
  if (cfg.defense != DefenseKind::fedsurrogate) throw ConfigError("ablation needs the fedsurrogate defense");
  const StageSwitches variants[] = {
      {false, false, false},  // a: stage 1 only, suspects excluded
      {true, false, false},   // b: + trusted-set screening
      {true, true, false},    // c: + rescue, flagged excluded
      {true, true, true},     // d: full pipeline
  };
  std::vector<ExperimentConfig> out;
  for (const auto& s : variants) {
    ExperimentConfig c = cfg;
    c.defense_cfg.stages = s;
    out.push_back(c);
  }
  return out;
}

std::vector<RunReport> ablate(const ExperimentConfig& cfg, const RunOptions& opts) {
  const char* names[] = {"a_stage1_only", "b_no_rescue", "c_exclusion", "d_full"};
  std::vector<RunReport> out;
  const auto variants = ablation_variants(cfg);
  for (std::size_t i = 0; i < variants.size(); ++i) {
    auto report = run_experiment(variants[i], opts);
    report.label = names[i];
    out.push_back(std::move(report));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Reports

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string fmt(const std::optional<double>& v) { return v ? fmt(*v) : "nan"; }

}  // namespace

std::string report_csv(const RunReport& r) {
  std::ostringstream out;
  out << "round,mta,asr,n_flagged,n_rescued,degenerate,critical_layers\n";
  for (const auto& rr : r.rounds) {
    std::string layers;
    for (std::size_t i = 0; i < rr.critical_layers.size(); ++i) {
      if (i) layers += ';';
      layers += rr.critical_layers[i];
    }
    out << rr.round << ',' << fmt(rr.mta) << ',' << fmt(rr.asr) << ',' << rr.n_flagged << ',' << rr.n_rescued << ','
        << (rr.degenerate ? 1 : 0) << ',' << layers << '\n';
  }
  out << "# summary,tpr=" << fmt(r.tpr) << ",fpr=" << fmt(r.fpr) << ",mcc=" << fmt(r.mcc)
      << ",config_hash=" << r.config_hash << ",seed=" << r.seed << '\n';
  return out.str();
}

void emit_report(const RunReport& report, const std::filesystem::path& path, ReportFormat format) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  if (format == ReportFormat::csv) {
    out << report_csv(report);
  } else {
    out << to_json(report).dump(2) << '\n';
  }
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

std::filesystem::path output_directory(const std::filesystem::path& fallback) {
  if (const char* env = std::getenv("FEDSUR_OUTPUT_DIR"); env != nullptr && *env != '\0') return env;
  return fallback;
}

}  // namespace fedsur

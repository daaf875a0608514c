#include "adl/sweep.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <tuple>

#include <fmt/format.h>
#include "adl/log.hpp"

#include "adl/errors.hpp"
#include "adl/experiment.hpp"
#include "adl/plot.hpp"

namespace adl::sweep {
namespace fs = std::filesystem;

namespace {

std::string tag(double v) { return fmt::format("{:g}", v); }

std::pair<double, double> mean_std(const std::vector<double>& v) {
  if (v.empty()) return {std::nan(""), std::nan("")};
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  if (v.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / static_cast<double>(v.size() - 1))};
}

void write_outputs(const SweepSpec& spec, const std::vector<eval::MetricsReport>& reports) {
  eval::write_metrics_csv(spec.out_dir / "metrics.csv", reports);
  eval::write_metrics_jsonl(spec.out_dir / "metrics.jsonl", reports);
  write_summary_csv(spec.out_dir / "summary.csv", summarize(reports));
  // Plots are drawn from the CSV as written, so they show exactly what a reload gives.
  write_sweep_plots(spec.out_dir / "plots", eval::read_metrics_csv(spec.out_dir / "metrics.csv"));
}

}  // namespace

std::vector<std::string> all_variants() {
  return {std::begin(kVariantNames), std::end(kVariantNames)};
}

void SweepSpec::validate() const {
  if (epsilons.empty() || categories.empty() || seeds.empty() || variants.empty()) {
    throw ConfigError("sweep needs nonempty epsilons, categories, seeds and variants");
  }
  for (double e : epsilons) {
    if (!(e >= 0.0 && e < 0.5)) throw ConfigError("sweep epsilon out of [0, 0.5): " + tag(e));
  }
  for (const auto& v : variants) {
    try {
      ablation_variant(v);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }
  if (axis) {
    if (axis->values.empty()) throw ConfigError("sweep axis needs values");
    if (axis->name == "lambda") {
      for (double v : axis->values) {
        if (!(v > 0.0)) throw ConfigError("lambda values must be positive");
      }
    } else if (axis->name == "alpha") {
      for (double v : axis->values) {
        if (!std::isfinite(v) || v == 1.0 || v == 0.0) {
          throw ConfigError("alpha values must be finite and exclude 0 and 1 (use the kl or rkl divergence)");
        }
      }
    } else {
      throw ConfigError("sweep axis must be 'lambda' or 'alpha', got '" + axis->name + "'");
    }
  }
}

SweepSpec parse_sweep_spec(const nlohmann::json& j, const std::vector<std::string>& default_variants) {
  if (!j.is_object()) throw ConfigError("sweep spec must be a map");
  static const std::set<std::string> known = {"out", "base", "base_config", "epsilons", "categories",
                                              "seeds", "axis", "variants"};
  for (const auto& [key, _] : j.items()) {
    if (!known.count(key)) throw ConfigError("unknown sweep key '" + key + "'");
  }
  SweepSpec spec;
  try {
    RunConfig base;
    if (j.contains("base_config")) base = RunConfig::from_json(load_structured_file(j.at("base_config").get<std::string>()));
    if (j.contains("base")) base = RunConfig::from_json(j.at("base"), base);
    spec.base = base;
    spec.epsilons = j.contains("epsilons") ? j.at("epsilons").get<std::vector<double>>()
                                           : std::vector<double>{base.epsilon};
    spec.categories = j.contains("categories") ? j.at("categories").get<std::vector<std::string>>()
                                               : std::vector<std::string>{base.data.category};
    spec.seeds = j.contains("seeds") ? j.at("seeds").get<std::vector<std::uint64_t>>()
                                     : std::vector<std::uint64_t>{base.train.seed};
    spec.variants = j.contains("variants") ? j.at("variants").get<std::vector<std::string>>() : default_variants;
    if (j.contains("axis") && !j.at("axis").is_null()) {
      const auto& a = j.at("axis");
      spec.axis = SweepAxis{a.at("name").get<std::string>(), a.at("values").get<std::vector<double>>()};
    }
    if (j.contains("out")) spec.out_dir = j.at("out").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("sweep spec: ") + e.what());
  }
  spec.validate();
  return spec;
}

SweepSpec load_sweep_spec(const fs::path& path, const std::vector<std::string>& default_variants) {
  auto j = load_structured_file(path);
  // base_config is relative to the sweep file.
  if (j.is_object() && j.contains("base_config") && j["base_config"].is_string()) {
    const fs::path base = j["base_config"].get<std::string>();
    if (base.is_relative()) j["base_config"] = (path.parent_path() / base).string();
  }
  return parse_sweep_spec(j, default_variants);
}

std::vector<Cell> expand_grid(const SweepSpec& spec) {
  spec.validate();
  std::vector<double> axis_values = spec.axis ? spec.axis->values : std::vector<double>{std::nan("")};
  std::vector<Cell> cells;
  for (const auto& category : spec.categories) {
    for (const auto& variant : spec.variants) {
      for (double eps : spec.epsilons) {
        for (double a : axis_values) {
          for (auto seed : spec.seeds) {
            RunConfig c = spec.base;
            c.data.category = category;
            c.train = apply_ablation_variant(c.train, variant);
            c.epsilon = eps;
            c.train.seed = seed;
            c.contamination_seed.reset();
            fs::path dir = spec.out_dir / "runs" / category / variant / ("eps_" + tag(eps));
            if (spec.axis) {
              if (spec.axis->name == "lambda") {
                c.train.divergence.lambda = a;
              } else {
                c.train.divergence.kind = Divergence::alpha;
                c.train.divergence.alpha = a;
              }
              dir /= spec.axis->name + "_" + tag(a);
            }
            dir /= "seed_" + std::to_string(seed);
            cells.push_back({std::move(c), std::move(dir)});
          }
        }
      }
    }
  }
  return cells;
}

CellRunner default_cell_runner() {
  return [](const RunConfig& config, const fs::path& dir) { return train_and_evaluate(config, dir).report; };
}

std::vector<eval::MetricsReport> run_sweep(const SweepSpec& spec, const CellRunner& runner) {
  const auto cells = expand_grid(spec);
  fs::create_directories(spec.out_dir);
  std::vector<eval::MetricsReport> reports;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const auto& cell = cells[i];
    logging::info("cell {}/{}: {}", i + 1, cells.size(), cell.dir.string());
    eval::MetricsReport report;
    try {
      report = runner(cell.config, cell.dir);
    } catch (const std::exception& e) {
      logging::error("cell {} failed: {}", cell.dir.string(), e.what());
      report = report_for(cell.config);
      report.status = "error";
      report.error = e.what();
      report.auc_roc = std::nan("");
      report.auc_pr = std::nan("");
      report.run_dir = cell.dir.string();
    }
    if (spec.axis) {
      report.axis = spec.axis->name;
      report.axis_value = spec.axis->name == "lambda" ? cell.config.train.divergence.lambda
                                                      : cell.config.train.divergence.alpha;
    }
    reports.push_back(std::move(report));
    write_outputs(spec, reports);  // keep partial results on disk
  }
  return reports;
}

std::vector<eval::MetricsReport> run_ablation(const SweepSpec& spec, const CellRunner& runner) {
  auto reports = run_sweep(spec, runner);
  std::ofstream(spec.out_dir / "ablation.md") << ablation_table_markdown(summarize(reports));
  return reports;
}

std::vector<SummaryRow> summarize(const std::vector<eval::MetricsReport>& reports) {
  using Key = std::tuple<std::string, std::string, std::string, double, std::string, double>;
  std::map<Key, std::vector<const eval::MetricsReport*>> groups;
  std::vector<Key> order;
  for (const auto& r : reports) {
    Key key{r.dataset, r.category, r.variant, r.epsilon, r.axis, r.axis_value};
    if (!groups.count(key)) order.push_back(key);
    groups[key].push_back(&r);
  }
  std::vector<SummaryRow> rows;
  for (const auto& key : order) {
    const auto& members = groups[key];
    SummaryRow row;
    std::tie(row.dataset, row.category, row.variant, row.epsilon, row.axis, row.axis_value) = key;
    row.n_runs = static_cast<int>(members.size());
    std::vector<double> roc, pr;
    for (const auto* r : members) {
      if (!r->ok()) continue;
      roc.push_back(r->auc_roc);
      pr.push_back(r->auc_pr);
    }
    row.n_ok = static_cast<int>(roc.size());
    std::tie(row.auc_roc_mean, row.auc_roc_std) = mean_std(roc);
    std::tie(row.auc_pr_mean, row.auc_pr_std) = mean_std(pr);
    rows.push_back(row);
  }

  // Unweighted mean over categories of the per-category means.
  using AvgKey = std::tuple<std::string, std::string, double, std::string, double>;
  std::map<AvgKey, std::vector<const SummaryRow*>> by_setting;
  std::vector<AvgKey> avg_order;
  for (const auto& row : rows) {
    AvgKey key{row.dataset, row.variant, row.epsilon, row.axis, row.axis_value};
    if (!by_setting.count(key)) avg_order.push_back(key);
    by_setting[key].push_back(&row);
  }
  std::vector<SummaryRow> averages;
  for (const auto& key : avg_order) {
    SummaryRow avg;
    std::tie(avg.dataset, avg.variant, avg.epsilon, avg.axis, avg.axis_value) = key;
    avg.category = "average";
    std::vector<double> roc, pr;
    for (const auto* row : by_setting[key]) {
      avg.n_runs += row->n_runs;
      avg.n_ok += row->n_ok;
      if (row->n_ok == 0) continue;
      roc.push_back(row->auc_roc_mean);
      pr.push_back(row->auc_pr_mean);
    }
    std::tie(avg.auc_roc_mean, avg.auc_roc_std) = mean_std(roc);
    std::tie(avg.auc_pr_mean, avg.auc_pr_std) = mean_std(pr);
    averages.push_back(avg);
  }
  rows.insert(rows.end(), averages.begin(), averages.end());
  return rows;
}

void write_summary_csv(const fs::path& path, const std::vector<SummaryRow>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "dataset,category,variant,epsilon,axis,axis_value,n_runs,n_ok,auc_roc_mean,auc_roc_std,auc_pr_mean,auc_pr_std\n";
  for (const auto& r : rows) {
    out << fmt::format("{},{},{},{:.17g},{},{:.17g},{},{},{:.17g},{:.17g},{:.17g},{:.17g}\n", r.dataset, r.category,
                       r.variant, r.epsilon, r.axis, r.axis_value, r.n_runs, r.n_ok, r.auc_roc_mean, r.auc_roc_std,
                       r.auc_pr_mean, r.auc_pr_std);
  }
}

void write_sweep_plots(const fs::path& plot_dir, const std::vector<eval::MetricsReport>& reports) {
  const auto summary = summarize(reports);
  const bool multi_category = std::any_of(summary.begin(), summary.end(), [&](const SummaryRow& r) {
    return r.category != "average" && r.category != summary.front().category;
  });
  const bool multi_variant = std::any_of(summary.begin(), summary.end(), [&](const SummaryRow& r) {
    return r.variant != summary.front().variant;
  });
  struct Metric {
    const char* name;
    const char* label;
    double SummaryRow::*mean;
  };
  const Metric metrics[] = {{"auc_roc", "AUC-ROC", &SummaryRow::auc_roc_mean},
                            {"auc_pr", "AUC-PR", &SummaryRow::auc_pr_mean}};

  for (const auto& metric : metrics) {
    // Metric vs contamination ratio; one series per category (and variant).
    std::map<std::string, plot::Series> series;
    std::map<std::string, std::map<std::string, plot::Series>> per_eps_axis;
    for (const auto& row : summary) {
      if (row.category == "average" && !multi_category) continue;
      std::string name = row.category;
      if (multi_variant) name += " " + row.variant;
      if (row.axis.empty()) {
        auto& s = series[name];
        s.label = name;
        s.x.push_back(row.epsilon);
        s.y.push_back(row.*(metric.mean));
      } else {
        const std::string label = name + " " + row.axis + "=" + tag(row.axis_value);
        auto& by_eps = series[label];
        by_eps.label = label;
        by_eps.x.push_back(row.epsilon);
        by_eps.y.push_back(row.*(metric.mean));
        const std::string chart = row.axis;
        auto& s = per_eps_axis[chart][name + " eps=" + tag(row.epsilon)];
        s.label = name + " eps=" + tag(row.epsilon);
        s.x.push_back(row.axis_value);
        s.y.push_back(row.*(metric.mean));
      }
    }
    if (!series.empty()) {
      plot::LineChart chart{fmt::format("{} vs contamination", metric.label), "contamination ratio", metric.label, {}, 0.0, 1.0};
      for (auto& [_, s] : series) chart.series.push_back(s);
      plot::write_svg(plot_dir / fmt::format("{}_vs_epsilon.svg", metric.name), chart);
    }
    for (auto& [axis, by_name] : per_eps_axis) {
      plot::LineChart chart{fmt::format("Sensitivity: {} vs {}", metric.label, axis), axis, metric.label, {}, 0.0, 1.0};
      for (auto& [_, s] : by_name) chart.series.push_back(s);
      plot::write_svg(plot_dir / fmt::format("{}_vs_{}.svg", metric.name, axis), chart);
    }
  }
}

std::string ablation_table_markdown(const std::vector<SummaryRow>& summary) {
  const auto variants = all_variants();
  std::vector<std::string> present;
  for (const auto& v : variants) {
    if (std::any_of(summary.begin(), summary.end(), [&](const SummaryRow& r) { return r.variant == v; })) {
      present.push_back(v);
    }
  }
  std::string md = "| Module |";
  for (const auto& v : present) md += " " + v + " |";
  md += "\n|---|";
  for (std::size_t i = 0; i < present.size(); ++i) md += "---|";
  md += "\n";
  const std::pair<const char*, std::function<bool(const LossModules&)>> rows[] = {
      {"l_dev", [](const LossModules& m) { return !m.soft_deviation; }},
      {"l_bce", [](const LossModules& m) { return m.bce; }},
      {"l_soft", [](const LossModules& m) { return m.soft_deviation; }},
      {"Sample reweight", [](const LossModules& m) { return m.reweight; }},
      {"l_seg", [](const LossModules& m) { return m.segmentation; }},
  };
  for (const auto& [name, has] : rows) {
    md += std::string("| ") + name + " |";
    for (const auto& v : present) md += has(ablation_variant(v)) ? " x |" : "  |";
    md += "\n";
  }
  std::vector<std::string> datasets;
  for (const auto& r : summary) {
    if (std::find(datasets.begin(), datasets.end(), r.dataset) == datasets.end()) datasets.push_back(r.dataset);
  }
  for (const auto& d : datasets) {
    md += "| " + d + " (Average) |";
    for (const auto& v : present) {
      // Average rows over categories; with several epsilons the first one listed is reported.
      auto it = std::find_if(summary.begin(), summary.end(), [&](const SummaryRow& r) {
        return r.dataset == d && r.variant == v && r.category == "average";
      });
      md += (it == summary.end() || std::isnan(it->auc_roc_mean)) ? " n/a |" : fmt::format(" {:.3f} |", it->auc_roc_mean);
    }
    md += "\n";
  }
  return md;
}

}  // namespace adl::sweep

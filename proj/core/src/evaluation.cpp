#include "adl/evaluation.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <torch/torch.h>

#include "adl/errors.hpp"
#include "adl/metrics.hpp"

namespace adl::eval {
namespace {

std::string csv_field(const std::string& text) {
  if (text.find_first_of(",\"\n") == std::string::npos) return text;
  std::string out = "\"";
  for (char c : text) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

std::string num(double v) { return fmt::format("{:.17g}", v); }

double parse_num(const std::string& s) {
  if (s == "nan" || s == "-nan") return std::nan("");
  return std::stod(s);
}

}  // namespace

ScoredSet score_test_set(AdlModel& model, std::span<const data::ImageSample> normals,
                         std::span<const data::ImageSample> anomalies, int batch_size) {
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  const bool was_training = model->is_training();
  model->eval();
  torch::NoGradGuard no_grad;
  ScoredSet out;
  std::vector<const data::ImageSample*> all;
  for (const auto& s : normals) all.push_back(&s);
  for (const auto& s : anomalies) all.push_back(&s);
  for (std::size_t start = 0; start < all.size(); start += static_cast<std::size_t>(batch_size)) {
    const std::size_t end = std::min(all.size(), start + static_cast<std::size_t>(batch_size));
    std::vector<torch::Tensor> images;
    for (std::size_t i = start; i < end; ++i) images.push_back(all[i]->image);
    const auto psi = model->forward(torch::stack(images)).psi_k.to(torch::kFloat64).contiguous();
    for (std::size_t i = start; i < end; ++i) {
      out.scores.push_back(psi[static_cast<int64_t>(i - start)].item<double>());
      out.labels.push_back(all[i]->y_true);
      out.sources.push_back(all[i]->source);
    }
  }
  model->train(was_training);
  return out;
}

nlohmann::json MetricsReport::to_json() const {
  auto metric = [](double v) -> nlohmann::json {
    if (std::isnan(v)) return nullptr;
    return v;
  };
  return {{"dataset", dataset},
          {"category", category},
          {"variant", variant},
          {"divergence", divergence},
          {"alpha", alpha},
          {"lambda", lambda},
          {"epsilon", epsilon},
          {"seed", seed},
          {"axis", axis},
          {"axis_value", axis_value},
          {"auc_roc", metric(auc_roc)},
          {"auc_pr", metric(auc_pr)},
          {"n_test_normal", n_test_normal},
          {"n_test_anomalous", n_test_anomalous},
          {"train_seconds", train_seconds},
          {"status", status},
          {"error", error},
          {"run_dir", run_dir},
          {"auc_pr_estimator", "average_precision"}};
}

MetricsReport MetricsReport::from_json(const nlohmann::json& j) {
  MetricsReport r;
  auto metric = [&](const char* key) {
    const auto& v = j.at(key);
    return v.is_null() ? std::nan("") : v.get<double>();
  };
  r.dataset = j.at("dataset").get<std::string>();
  r.category = j.at("category").get<std::string>();
  r.variant = j.value("variant", "Proposed");
  r.divergence = j.value("divergence", "");
  r.alpha = j.value("alpha", 0.0);
  r.lambda = j.value("lambda", 0.0);
  r.epsilon = j.at("epsilon").get<double>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.axis = j.value("axis", "");
  r.axis_value = j.value("axis_value", 0.0);
  r.auc_roc = metric("auc_roc");
  r.auc_pr = metric("auc_pr");
  r.n_test_normal = j.value("n_test_normal", 0);
  r.n_test_anomalous = j.value("n_test_anomalous", 0);
  r.train_seconds = j.value("train_seconds", 0.0);
  r.status = j.value("status", "ok");
  r.error = j.value("error", "");
  r.run_dir = j.value("run_dir", "");
  return r;
}

const std::vector<std::string>& csv_columns() {
  static const std::vector<std::string> columns = {
      "dataset", "category", "variant",  "divergence",    "alpha",         "lambda",
      "epsilon", "seed",     "axis",     "axis_value",    "auc_roc",       "auc_pr",
      "n_test_normal",       "n_test_anomalous",          "train_seconds", "status",
      "error",   "run_dir"};
  return columns;
}

void write_metrics_csv(const std::filesystem::path& path, std::span<const MetricsReport> reports) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  const auto& cols = csv_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
  out << '\n';
  for (const auto& r : reports) {
    out << csv_field(r.dataset) << ',' << csv_field(r.category) << ',' << csv_field(r.variant) << ','
        << csv_field(r.divergence) << ',' << num(r.alpha) << ',' << num(r.lambda) << ',' << num(r.epsilon)
        << ',' << r.seed << ',' << csv_field(r.axis) << ',' << num(r.axis_value) << ',' << num(r.auc_roc)
        << ',' << num(r.auc_pr) << ',' << r.n_test_normal << ',' << r.n_test_anomalous << ','
        << num(r.train_seconds) << ',' << csv_field(r.status) << ',' << csv_field(r.error) << ','
        << csv_field(r.run_dir) << '\n';
  }
}

std::vector<MetricsReport> read_metrics_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path.string());
  std::string line;
  std::getline(in, line);
  if (split_csv_line(line) != csv_columns()) throw ConfigError(path.string() + ": unexpected header");
  std::vector<MetricsReport> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != csv_columns().size()) throw ConfigError(path.string() + ": malformed row: " + line);
    MetricsReport r;
    r.dataset = f[0];
    r.category = f[1];
    r.variant = f[2];
    r.divergence = f[3];
    r.alpha = parse_num(f[4]);
    r.lambda = parse_num(f[5]);
    r.epsilon = parse_num(f[6]);
    r.seed = std::stoull(f[7]);
    r.axis = f[8];
    r.axis_value = parse_num(f[9]);
    r.auc_roc = parse_num(f[10]);
    r.auc_pr = parse_num(f[11]);
    r.n_test_normal = std::stoi(f[12]);
    r.n_test_anomalous = std::stoi(f[13]);
    r.train_seconds = parse_num(f[14]);
    r.status = f[15];
    r.error = f[16];
    r.run_dir = f[17];
    out.push_back(std::move(r));
  }
  return out;
}

void write_metrics_jsonl(const std::filesystem::path& path, std::span<const MetricsReport> reports) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& r : reports) out << r.to_json().dump() << '\n';
}

void fill_metrics(MetricsReport& report, const ScoredSet& scored) {
  report.n_test_normal = static_cast<int>(std::count(scored.labels.begin(), scored.labels.end(), 0));
  report.n_test_anomalous = static_cast<int>(std::count(scored.labels.begin(), scored.labels.end(), 1));
  try {
    report.auc_roc = metrics::auc_roc(scored.scores, scored.labels);
    report.auc_pr = metrics::auc_pr(scored.scores, scored.labels);
  } catch (const std::exception& e) {
    report.auc_roc = std::nan("");
    report.auc_pr = std::nan("");
    report.status = "error";
    report.error = e.what();
  }
}

void write_scores_csv(const std::filesystem::path& path, const ScoredSet& scored) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "source,label,score\n";
  for (std::size_t i = 0; i < scored.scores.size(); ++i) {
    out << csv_field(scored.sources[i]) << ',' << scored.labels[i] << ',' << num(scored.scores[i]) << '\n';
  }
}

}  // namespace adl::eval

#include "intentsynth/report.hpp"

#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "intentsynth/errors.hpp"

namespace intentsynth {

ReportFormat parse_report_format(std::string_view name) {
  if (name == "csv")
    return ReportFormat::csv;
  if (name == "json")
    return ReportFormat::json;
  if (name == "markdown" || name == "md")
    return ReportFormat::markdown;
  throw ConfigError("unknown report format '" + std::string(name) + "'");
}

std::string format_cell(const AggregateScore &score) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f±%.2f", score.mean * 100.0, score.std * 100.0);
  return buf;
}

namespace {

std::string csv_field(const std::string &s) {
  if (s.find_first_of(",\"\n") == std::string::npos)
    return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"')
      out += "\"\"";
    else
      out.push_back(c);
  }
  return out + "\"";
}

std::string cell_text(const CellResult &c) { return c.score ? format_cell(*c.score) : "ERR"; }

std::string file_stem(const std::string &s) {
  std::string out;
  for (char c : s)
    out.push_back(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' ? c : '_');
  return out;
}

void write_file(const std::filesystem::path &path, const std::string &contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    throw DataError("cannot write '" + path.string() + "'");
  out << contents;
  if (!out)
    throw DataError("I/O error while writing '" + path.string() + "'");
}

} // namespace

std::string matrix_to_csv(const ResultMatrix &m) {
  std::ostringstream out;
  out << "train\\test";
  for (const auto &t : m.test_names)
    out << ',' << csv_field(t);
  out << '\n';
  for (const auto &r : m.train_names) {
    out << csv_field(r);
    for (const auto &t : m.test_names)
      out << ',' << cell_text(m.cell(r, t));
    out << '\n';
  }
  return out.str();
}

std::string matrix_to_markdown(const ResultMatrix &m) {
  std::ostringstream out;
  out << "Accuracy (%), mean±std over " << m.runs << (m.runs == 1 ? " run" : " runs") << ", "
      << mode_name(m.mode) << ". Rows: training set. Columns: test set.\n\n";
  out << "| Train \\ Test |";
  for (const auto &t : m.test_names)
    out << ' ' << t << " |";
  out << "\n|---|";
  for (std::size_t i = 0; i < m.test_names.size(); ++i)
    out << "---|";
  out << '\n';
  for (const auto &r : m.train_names) {
    out << "| " << r << " |";
    for (const auto &t : m.test_names)
      out << ' ' << cell_text(m.cell(r, t)) << " |";
    out << '\n';
  }
  bool any_error = false;
  for (const auto &c : m.cells)
    any_error = any_error || !c.error.empty();
  if (any_error) {
    out << "\nFailed cells:\n\n";
    for (const auto &c : m.cells) {
      if (!c.error.empty())
        out << "- " << c.train << " / " << c.test << ": " << c.error << '\n';
    }
  }
  return out.str();
}

std::string confusion_to_csv(const ConfusionMatrix &cm) {
  std::ostringstream out;
  out << "gold\\predicted";
  for (auto l : kAllLabels)
    out << ',' << label_name(l);
  out << '\n';
  for (std::size_t g = 0; g < kNumLabels; ++g) {
    out << label_name(kAllLabels[g]);
    for (std::size_t p = 0; p < kNumLabels; ++p)
      out << ',' << cm.counts[g][p];
    out << '\n';
  }
  return out.str();
}

nlohmann::ordered_json matrix_to_json(const ResultMatrix &m) {
  nlohmann::ordered_json j;
  j["format"] = "intentsynth-result-matrix";
  j["version"] = 1;
  j["plan_hash"] = m.plan_hash;
  j["aggregation_mode"] = mode_name(m.mode);
  j["runs"] = m.runs;
  j["train_names"] = m.train_names;
  j["test_names"] = m.test_names;
  auto order = nlohmann::ordered_json::array();
  for (auto l : kAllLabels)
    order.push_back(label_name(l));
  j["label_order"] = std::move(order);
  auto cells = nlohmann::ordered_json::array();
  for (const auto &c : m.cells) {
    nlohmann::ordered_json cj;
    cj["train"] = c.train;
    cj["test"] = c.test;
    cj["portion"] = c.portion;
    cj["test_items"] = c.test_items;
    if (c.score) {
      cj["mean"] = c.score->mean;
      cj["std"] = c.score->std;
      cj["n"] = c.score->n;
    } else {
      cj["mean"] = nullptr;
      cj["std"] = nullptr;
      cj["n"] = 0;
    }
    cj["values"] = c.values;
    auto counts = nlohmann::ordered_json::array();
    for (const auto &row : c.confusion.counts)
      counts.push_back(row);
    cj["confusion"] = std::move(counts);
    cj["error"] = c.error.empty() ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(c.error);
    cells.push_back(std::move(cj));
  }
  j["cells"] = std::move(cells);
  return j;
}

ResultMatrix matrix_from_json(const nlohmann::json &j) {
  try {
    if (j.at("format").get<std::string>() != "intentsynth-result-matrix")
      throw DataError("not a result matrix");
    ResultMatrix m;
    m.plan_hash = j.at("plan_hash").get<std::string>();
    m.mode = parse_mode(j.at("aggregation_mode").get<std::string>());
    m.runs = j.at("runs").get<int>();
    m.train_names = j.at("train_names").get<std::vector<std::string>>();
    m.test_names = j.at("test_names").get<std::vector<std::string>>();
    for (const auto &cj : j.at("cells")) {
      CellResult c;
      c.train = cj.at("train").get<std::string>();
      c.test = cj.at("test").get<std::string>();
      c.portion = cj.value("portion", "");
      c.test_items = cj.value("test_items", std::size_t{0});
      if (!cj.at("mean").is_null()) {
        AggregateScore s;
        s.mean = cj.at("mean").get<double>();
        s.std = cj.at("std").get<double>();
        s.n = cj.at("n").get<std::size_t>();
        s.mode = m.mode;
        c.score = s;
      }
      c.values = cj.at("values").get<std::vector<double>>();
      const auto &counts = cj.at("confusion");
      if (counts.size() != kNumLabels)
        throw DataError("confusion matrix must have six rows");
      for (std::size_t g = 0; g < kNumLabels; ++g) {
        if (counts[g].size() != kNumLabels)
          throw DataError("confusion matrix must have six columns");
        for (std::size_t p = 0; p < kNumLabels; ++p)
          c.confusion.counts[g][p] = counts[g][p].get<std::size_t>();
      }
      if (!cj.at("error").is_null())
        c.error = cj.at("error").get<std::string>();
      m.cells.push_back(std::move(c));
    }
    if (m.cells.size() != m.train_names.size() * m.test_names.size())
      throw DataError("cell count does not match the row and column names");
    return m;
  } catch (const nlohmann::json::exception &e) {
    throw DataError(std::string("malformed result matrix: ") + e.what());
  }
}

std::vector<std::filesystem::path> emit_report(const ResultMatrix &m, const std::set<ReportFormat> &formats,
                                               const std::filesystem::path &dir) {
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> written;
  if (formats.count(ReportFormat::csv)) {
    write_file(dir / "matrix.csv", matrix_to_csv(m));
    written.push_back(dir / "matrix.csv");
    const auto cdir = dir / "confusion";
    std::filesystem::create_directories(cdir);
    for (const auto &c : m.cells) {
      if (!c.error.empty())
        continue;
      const auto path = cdir / (file_stem(c.train) + "__" + file_stem(c.test) + ".csv");
      write_file(path, confusion_to_csv(c.confusion));
      written.push_back(path);
    }
  }
  if (formats.count(ReportFormat::json)) {
    write_file(dir / "matrix.json", matrix_to_json(m).dump(2) + "\n");
    written.push_back(dir / "matrix.json");
  }
  if (formats.count(ReportFormat::markdown)) {
    write_file(dir / "matrix.md", matrix_to_markdown(m));
    written.push_back(dir / "matrix.md");
  }
  return written;
}

} // namespace intentsynth

#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "intentsynth/classify.hpp"
#include "intentsynth/corpus.hpp"
#include "intentsynth/curate.hpp"
#include "intentsynth/errors.hpp"
#include "intentsynth/harness.hpp"
#include "intentsynth/metrics.hpp"
#include "intentsynth/parser.hpp"
#include "intentsynth/promptgen.hpp"
#include "intentsynth/report.hpp"

namespace py = pybind11;
using namespace intentsynth;

namespace {

// Labels cross the boundary as their canonical names.
IntentLabel label_of(const std::string &name) { return parse_label(name); }
std::string name_of(IntentLabel label) { return std::string(label_name(label)); }

py::dict error_rate_dict(const ErrorRate &r) {
  py::dict d;
  d["rate"] = r.rate;
  d["substitutions"] = r.substitutions;
  d["insertions"] = r.insertions;
  d["deletions"] = r.deletions;
  d["ref_len"] = r.ref_len;
  d["unit"] = r.unit;
  d["norm"] = r.norm;
  return d;
}

// A trained cn1 head bundled with the hashed_bow provider it was trained on.
struct TrainedModel {
  CheckpointSet checkpoints;
  std::shared_ptr<HashedBowProvider> provider;

  std::vector<std::string> predict(const std::vector<std::string> &texts, int epoch) const {
    const auto &cps = checkpoints.checkpoints;
    if (epoch < 0 || epoch > static_cast<int>(cps.size()))
      throw UsageError("no checkpoint for epoch " + std::to_string(epoch));
    const auto &head = epoch == 0 ? checkpoints.final().head : cps[static_cast<std::size_t>(epoch - 1)].head;
    std::vector<std::string> out;
    for (const auto &v : provider->embed_batch(texts))
      out.push_back(name_of(head.predict(v).label));
    return out;
  }

  double accuracy(const Dataset &d) const {
    std::vector<std::string> texts;
    std::vector<IntentLabel> gold;
    for (const auto &u : d.items) {
      texts.push_back(u.text);
      gold.push_back(u.label);
    }
    const auto feats = provider->embed_batch(texts);
    return evaluate_accuracy(checkpoints.final().head, feats, gold);
  }
};

} // namespace

PYBIND11_MODULE(_intentsynth, m) {
  m.doc() = "Synthetic German intent corpora: generation, curation, training and evaluation";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<UsageError>(m, "UsageError", base.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<NetworkError>(m, "NetworkError", base.ptr());
  py::register_exception<DataError>(m, "DataError", base.ptr());
  py::register_exception<BudgetExhausted>(m, "BudgetExhausted", base.ptr());

  std::vector<std::string> labels;
  for (auto l : kAllLabels)
    labels.push_back(name_of(l));
  m.attr("LABELS") = labels;

  py::class_<Utterance>(m, "Utterance")
      .def(py::init([](std::string text, const std::string &label, std::string source, std::string prompt_id) {
             Utterance u;
             u.text = std::move(text);
             u.label = label_of(label);
             u.source = std::move(source);
             u.prompt_id = std::move(prompt_id);
             return u;
           }),
           py::arg("text"), py::arg("label"), py::arg("source") = "", py::arg("prompt_id") = "")
      .def_readwrite("text", &Utterance::text)
      .def_property(
          "label", [](const Utterance &u) { return name_of(u.label); },
          [](Utterance &u, const std::string &l) { u.label = label_of(l); })
      .def_readwrite("source", &Utterance::source)
      .def_readwrite("prompt_id", &Utterance::prompt_id)
      .def_readwrite("seed", &Utterance::seed)
      .def_property_readonly("status", [](const Utterance &u) { return std::string(status_name(u.status)); })
      .def_property_readonly("original_label",
                             [](const Utterance &u) -> std::optional<std::string> {
                               if (u.original_label)
                                 return name_of(*u.original_label);
                               return std::nullopt;
                             })
      .def(py::self == py::self)
      .def("__repr__", [](const Utterance &u) { return "<Utterance " + name_of(u.label) + ": " + u.text + ">"; });

  py::class_<Dataset>(m, "Dataset")
      .def(py::init([](std::string name, std::vector<Utterance> items) { return Dataset{std::move(name), std::move(items)}; }),
           py::arg("name") = "", py::arg("items") = std::vector<Utterance>{})
      .def_readwrite("name", &Dataset::name)
      .def_readwrite("items", &Dataset::items)
      .def("__len__", &Dataset::size)
      .def("label_counts",
           [](const Dataset &d) {
             std::map<std::string, std::size_t> out;
             const auto counts = d.label_counts();
             for (auto l : kAllLabels)
               out[name_of(l)] = counts[label_index(l)];
             return out;
           })
      .def(py::self == py::self);

  m.def("load_dataset", &load_dataset, py::arg("path"));
  m.def("save_dataset", &save_dataset, py::arg("dataset"), py::arg("path"));
  m.def("dedup", &dedup, py::arg("dataset"));
  m.def(
      "split",
      [](const Dataset &d, double train, double val, double test, std::uint64_t seed) {
        const auto b = stratified_split(d, SplitRatios{train, val, test}, seed);
        return py::make_tuple(b.train, b.val, b.test);
      },
      py::arg("dataset"), py::arg("train") = 0.7, py::arg("val") = 0.2, py::arg("test") = 0.1, py::arg("seed") = 0,
      "Stratified split into (train, val, test).");
  m.def(
      "balanced_quotas",
      [](std::size_t total) {
        std::map<std::string, std::size_t> out;
        const auto q = balanced_quotas(total);
        for (auto l : kAllLabels)
          out[name_of(l)] = q[label_index(l)];
        return out;
      },
      py::arg("total"));

  m.def("normalize_utterance", &normalize_utterance, py::arg("text"));
  m.def(
      "parse_block",
      [](const std::string &raw, const std::string &speaker, const std::string &end) {
        const auto r = parse_block(raw, speaker, end);
        py::dict d;
        d["accepted"] = r.accepted;
        d["dropped_incomplete"] = r.dropped_incomplete;
        d["dropped_empty"] = r.dropped_empty;
        d["dropped_duplicate_within_block"] = r.dropped_duplicate_within_block;
        d["reopened"] = r.reopened;
        return d;
      },
      py::arg("raw"), py::arg("speaker_keyword") = std::string(kDefaultSpeakerKeyword),
      py::arg("end_keyword") = std::string(kDefaultEndKeyword));

  m.def(
      "draw_seeds",
      [](std::uint64_t state, std::size_t n) {
        std::vector<std::uint64_t> out;
        for (std::size_t i = 0; i < n; ++i)
          out.push_back(draw_seed(state));
        return out;
      },
      py::arg("state"), py::arg("n"), "The first n per-call seeds of a generation campaign.");
  m.def(
      "prompt_variants",
      [](const std::string &label) {
        std::vector<std::pair<std::string, std::string>> out;
        for (const auto &t : variants_for(label_of(label)))
          out.emplace_back(t.variant_id, t.render());
        return out;
      },
      py::arg("label"), "(variant id, rendered prompt) pairs for a label.");

  m.def(
      "word_error_rate",
      [](const std::string &ref, const std::string &hyp, const std::string &norm) {
        return error_rate_dict(word_error_rate(ref, hyp, TextNorm::by_name(norm)));
      },
      py::arg("reference"), py::arg("hypothesis"), py::arg("norm") = "casefold-strip-punct-v1");
  m.def(
      "char_error_rate",
      [](const std::string &ref, const std::string &hyp, const std::string &norm) {
        return error_rate_dict(char_error_rate(ref, hyp, TextNorm::by_name(norm)));
      },
      py::arg("reference"), py::arg("hypothesis"), py::arg("norm") = "casefold-strip-punct-v1");
  m.def(
      "format_cell", [](double mean, double std) { return format_cell(AggregateScore{mean, std, 1, {}}); },
      py::arg("mean"), py::arg("std"), "Two-decimal percent cell, e.g. 95.59±0.90.");

  m.def(
      "hash_bow", [](const std::string &text, std::size_t dim) { return hash_bow(text, dim).values; },
      py::arg("text"), py::arg("dim") = 256);

  py::class_<TrainedModel>(m, "TrainedModel")
      .def("predict", &TrainedModel::predict, py::arg("texts"), py::arg("epoch") = 0,
           "Labels for texts; epoch 0 means the final checkpoint.")
      .def("accuracy", &TrainedModel::accuracy, py::arg("dataset"))
      .def_property_readonly("epochs", [](const TrainedModel &t) { return t.checkpoints.checkpoints.size(); })
      .def_property_readonly("optimizer", [](const TrainedModel &t) { return t.checkpoints.optimizer; })
      .def_property_readonly("train_losses", [](const TrainedModel &t) {
        std::vector<double> out;
        for (const auto &c : t.checkpoints.checkpoints)
          out.push_back(c.train_loss);
        return out;
      });

  m.def(
      "train_cn1",
      [](const Dataset &train, const Dataset &val, std::size_t dim, double lr, double dropout, int epochs,
         int batch_size, std::uint64_t seed) {
        HeadConfig c;
        c.learning_rate = lr;
        c.dropout = dropout;
        c.epochs = epochs;
        c.batch_size = batch_size;
        c.seed = seed;
        auto provider = std::make_shared<HashedBowProvider>(dim);
        py::gil_scoped_release release;
        return TrainedModel{train_head(train, val, *provider, c), provider};
      },
      py::arg("train"), py::arg("val") = Dataset{}, py::arg("dim") = 256, py::arg("lr") = 3e-4,
      py::arg("dropout") = 0.1, py::arg("epochs") = 5, py::arg("batch_size") = 32, py::arg("seed") = 0,
      "Train a linear head over hashed bag-of-words features.");

  m.def(
      "cross_eval",
      [](const std::vector<Dataset> &train_sets, const std::vector<Dataset> &test_sets, int runs, std::size_t dim,
         bool combined, const std::string &aggregation, std::uint64_t seed) {
        ExperimentPlan plan;
        for (const auto &d : train_sets)
          plan.train_sets.push_back({d.name, d});
        for (const auto &d : test_sets)
          plan.test_sets.push_back({d.name, d});
        plan.runs = runs;
        plan.add_combined = combined;
        plan.mode = parse_mode(aggregation);
        plan.seed = seed;
        plan.trainer = std::make_shared<HeadTrainer>(std::make_shared<HashedBowProvider>(dim), HeadConfig{});
        ResultMatrix matrix;
        {
          py::gil_scoped_release release;
          matrix = cross_eval(plan);
        }
        py::dict out;
        out["csv"] = matrix_to_csv(matrix);
        out["json"] = matrix_to_json(matrix).dump();
        out["plan_hash"] = matrix.plan_hash;
        py::dict cells;
        for (const auto &c : matrix.cells) {
          py::dict cell;
          cell["mean"] = c.score ? py::cast(c.score->mean) : py::none();
          cell["std"] = c.score ? py::cast(c.score->std) : py::none();
          cell["test_items"] = c.test_items;
          cell["portion"] = c.portion;
          cell["error"] = c.error;
          cells[py::make_tuple(c.train, c.test)] = cell;
        }
        out["cells"] = cells;
        return out;
      },
      py::arg("train_sets"), py::arg("test_sets"), py::arg("runs") = 5, py::arg("dim") = 256,
      py::arg("combined") = true, py::arg("aggregation") = "per_run_finals", py::arg("seed") = 0,
      "Train on each set, test on every set; cells are keyed by (train, test).");

  m.def(
      "replay_decisions",
      [](const Dataset &d, const std::filesystem::path &log) { return apply_log(d, load_decision_log(log, d)); },
      py::arg("dataset"), py::arg("log"), "Apply a recorded curation log to a dataset.");
}

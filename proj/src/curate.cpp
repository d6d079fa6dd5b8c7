#include "intentsynth/curate.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>

#include <termios.h>
#include <unistd.h>

#include "intentsynth/errors.hpp"
#include "intentsynth/log.hpp"
#include "intentsynth/text.hpp"

namespace intentsynth {

std::string_view action_name(CurationAction action) {
  switch (action) {
  case CurationAction::accept:
    return "accept";
  case CurationAction::reject:
    return "reject";
  case CurationAction::relabel:
    return "relabel";
  }
  return "accept";
}

CurationAction parse_action(std::string_view name) {
  if (name == "accept")
    return CurationAction::accept;
  if (name == "reject")
    return CurationAction::reject;
  if (name == "relabel")
    return CurationAction::relabel;
  throw DataError("unknown curation action '" + std::string(name) + "'");
}

DatasetFingerprint DatasetFingerprint::of(const Dataset &dataset) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto &item : dataset.items) {
    h = text::fnv1a64(item.text, h);
    h = text::fnv1a64(std::string_view("\n", 1), h);
  }
  return DatasetFingerprint{dataset.items.size(), text::hex64(h)};
}

nlohmann::ordered_json decision_to_json(const CurationDecision &d, const DatasetFingerprint &fp) {
  nlohmann::ordered_json j;
  j["utterance_index"] = d.utterance_index;
  j["action"] = action_name(d.action);
  j["new_label"] = d.new_label ? nlohmann::ordered_json(label_name(*d.new_label)) : nullptr;
  j["reason"] = d.reason ? nlohmann::ordered_json(*d.reason) : nullptr;
  j["reviewer"] = d.reviewer;
  j["timestamp"] = d.timestamp;
  j["dataset_items"] = fp.items;
  j["dataset_hash"] = fp.text_hash;
  return j;
}

CurationDecision decision_from_json(const nlohmann::json &j, DatasetFingerprint *fp) {
  try {
    CurationDecision d;
    d.utterance_index = j.at("utterance_index").get<std::size_t>();
    d.action = parse_action(j.at("action").get<std::string>());
    if (j.contains("new_label") && !j["new_label"].is_null())
      d.new_label = parse_label(j["new_label"].get<std::string>());
    if (j.contains("reason") && !j["reason"].is_null())
      d.reason = j["reason"].get<std::string>();
    d.reviewer = j.value("reviewer", "");
    d.timestamp = j.value("timestamp", "");
    if ((d.action == CurationAction::relabel) != d.new_label.has_value())
      throw DataError("new_label is required for relabel and only for relabel");
    if (fp) {
      fp->items = j.at("dataset_items").get<std::size_t>();
      fp->text_hash = j.at("dataset_hash").get<std::string>();
    }
    return d;
  } catch (const nlohmann::json::exception &e) {
    throw DataError(std::string("malformed curation decision: ") + e.what());
  }
}

std::vector<CurationDecision> load_decision_log(const std::filesystem::path &path, const Dataset &dataset) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw DataError("cannot open decision log '" + path.string() + "'");
  const std::string contents((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto expected = DatasetFingerprint::of(dataset);

  std::vector<CurationDecision> out;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < contents.size()) {
    const auto nl = contents.find('\n', pos);
    if (nl == std::string::npos)
      break; // interrupted write
    const std::string_view line(contents.data() + pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos)
      continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error &) {
      throw DataError(path.string() + ": malformed decision at line " + std::to_string(line_no));
    }
    DatasetFingerprint fp;
    auto d = decision_from_json(j, &fp);
    if (fp != expected)
      throw DataError(path.string() + ": log was written for a different dataset (" + std::to_string(fp.items) +
                      " items, hash " + fp.text_hash + "; this dataset has " + std::to_string(expected.items) +
                      " items, hash " + expected.text_hash + "); refusing to resume");
    if (d.utterance_index >= dataset.items.size())
      throw DataError(path.string() + ": decision index out of range at line " + std::to_string(line_no));
    out.push_back(std::move(d));
  }
  return out;
}

Dataset apply_log(const Dataset &dataset, const std::vector<CurationDecision> &log) {
  std::vector<const CurationDecision *> latest(dataset.items.size(), nullptr);
  for (const auto &d : log) {
    if (d.utterance_index >= dataset.items.size())
      throw DataError("decision index " + std::to_string(d.utterance_index) + " is out of range for " +
                      std::to_string(dataset.items.size()) + " items");
    const auto &item = dataset.items[d.utterance_index];
    if (d.action == CurationAction::relabel) {
      if (!d.new_label)
        throw DataError("relabel decision for item " + std::to_string(d.utterance_index) + " has no new label");
      if (*d.new_label == item.label)
        throw DataError("relabel of item " + std::to_string(d.utterance_index) + " to its own label '" +
                        std::string(label_name(item.label)) + "'");
    }
    latest[d.utterance_index] = &d;
  }

  Dataset out;
  out.name = dataset.name;
  for (std::size_t i = 0; i < dataset.items.size(); ++i) {
    const auto *d = latest[i];
    Utterance item = dataset.items[i];
    if (d) {
      switch (d->action) {
      case CurationAction::reject:
        continue;
      case CurationAction::accept:
        item.status = UtteranceStatus::accepted;
        break;
      case CurationAction::relabel:
        item.original_label = item.label;
        item.label = *d->new_label;
        item.status = UtteranceStatus::relabeled;
        break;
      }
    }
    out.items.push_back(std::move(item));
  }
  return out;
}

namespace {

enum class Key { accept, reject, relabel, skip, quit };

struct Command {
  Key key = Key::quit;
  std::optional<std::string> reason;
  std::optional<IntentLabel> label;
};

int next_nonspace(std::istream &in) {
  for (;;) {
    const int c = in.get();
    if (c == std::char_traits<char>::eof())
      return c;
    if (c != ' ' && c != '\t' && c != '\n' && c != '\r')
      return c;
  }
}

Command read_command(std::istream &in, std::ostream &display) {
  for (;;) {
    const int c = next_nonspace(in);
    switch (c) {
    case std::char_traits<char>::eof():
    case 'q':
    case 'Q':
      return {Key::quit, {}, {}};
    case 'a':
    case 'A':
      return {Key::accept, {}, {}};
    case 's':
    case 'S':
      return {Key::skip, {}, {}};
    case 'r':
    case 'R': {
      Command cmd{Key::reject, {}, {}};
      display << "  reason? [g]rammar [n]onsense [w]rong-command, other key: none\n" << std::flush;
      switch (in.peek()) {
      case 'g':
        cmd.reason = kReasonGrammar;
        break;
      case 'n':
        cmd.reason = kReasonNonsense;
        break;
      case 'w':
        cmd.reason = kReasonWrongCommand;
        break;
      default:
        break;
      }
      if (cmd.reason)
        in.get();
      return cmd;
    }
    case 'l':
    case 'L': {
      display << "  new label? [1-6]\n" << std::flush;
      const int d = next_nonspace(in);
      if (d >= '1' && d <= '6')
        return {Key::relabel, {}, kAllLabels[static_cast<std::size_t>(d - '1')]};
      if (d == std::char_traits<char>::eof())
        return {Key::quit, {}, {}};
      display << "  expected a digit 1-6\n";
      break;
    }
    default:
      display << "  keys: a accept, r reject, l<1-6> relabel, s skip, q quit\n";
      break;
    }
  }
}

void status_bar(std::ostream &display, std::size_t index, std::size_t total,
                const std::array<std::size_t, kNumLabels> &accepted) {
  display << "[" << index + 1 << "/" << total << "]";
  for (auto label : kAllLabels)
    display << " " << label_name(label) << ":" << accepted[label_index(label)];
  display << "\n";
}

} // namespace

ReviewResult review_session(const Dataset &dataset, std::istream &keys, std::ostream &display,
                            const ReviewOptions &options) {
  const auto fp = DatasetFingerprint::of(dataset);
  auto clock = options.clock ? options.clock : [] { return log::utc_timestamp(); };

  ReviewResult result;
  std::ofstream writer;
  if (options.log_path) {
    const auto &path = *options.log_path;
    if (std::filesystem::exists(path)) {
      result.log = load_decision_log(path, dataset);
      // Drop an interrupted final line so appends start on a clean line.
      std::ifstream in(path, std::ios::binary);
      const std::string contents((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
      const auto last_nl = contents.rfind('\n');
      const auto keep = last_nl == std::string::npos ? 0 : last_nl + 1;
      if (keep != contents.size())
        std::filesystem::resize_file(path, keep);
    }
    writer.open(path, std::ios::binary | std::ios::app);
    if (!writer)
      throw DataError("cannot write decision log '" + path.string() + "'");
  }

  std::vector<bool> decided(dataset.items.size(), false);
  std::array<std::size_t, kNumLabels> accepted{};
  auto count = [&](const CurationDecision &d) {
    const auto &item = dataset.items[d.utterance_index];
    if (d.action == CurationAction::accept)
      accepted[label_index(item.label)] += 1;
    else if (d.action == CurationAction::relabel)
      accepted[label_index(*d.new_label)] += 1;
  };
  {
    std::vector<const CurationDecision *> latest(dataset.items.size(), nullptr);
    for (const auto &d : result.log)
      latest[d.utterance_index] = &d;
    for (std::size_t i = 0; i < latest.size(); ++i) {
      if (latest[i]) {
        decided[i] = true;
        count(*latest[i]);
      }
    }
  }

  for (std::size_t i = 0; i < dataset.items.size() && !result.quit; ++i) {
    if (decided[i])
      continue;
    const auto &item = dataset.items[i];
    status_bar(display, i, dataset.items.size(), accepted);
    display << "  " << label_name(item.label) << " | " << item.source << " | " << item.text << "\n" << std::flush;

    for (;;) {
      const auto cmd = read_command(keys, display);
      if (cmd.key == Key::quit) {
        result.quit = true;
        break;
      }
      if (cmd.key == Key::skip)
        break;
      CurationDecision d;
      d.utterance_index = i;
      d.reviewer = options.reviewer;
      d.timestamp = clock();
      if (cmd.key == Key::accept) {
        d.action = CurationAction::accept;
      } else if (cmd.key == Key::reject) {
        d.action = CurationAction::reject;
        d.reason = cmd.reason;
      } else {
        if (*cmd.label == item.label) {
          display << "  already labeled " << label_name(item.label) << "\n";
          continue;
        }
        d.action = CurationAction::relabel;
        d.new_label = cmd.label;
      }
      if (writer.is_open()) {
        writer << decision_to_json(d, fp).dump() << '\n';
        writer.flush();
        if (!writer)
          throw DataError("I/O error while writing the decision log");
      }
      decided[i] = true;
      count(d);
      result.log.push_back(std::move(d));
      break;
    }
  }

  result.undecided = static_cast<std::size_t>(std::count(decided.begin(), decided.end(), false));
  result.curated = apply_log(dataset, result.log);
  return result;
}

struct RawTerminal::Saved {
  termios attrs{};
};

RawTerminal::RawTerminal(int fd) : fd_(fd) {
  if (!isatty(fd_))
    return;
  saved_ = std::make_unique<Saved>();
  if (tcgetattr(fd_, &saved_->attrs) != 0)
    return;
  termios raw = saved_->attrs;
  raw.c_lflag &= ~static_cast<tcflag_t>(ICANON | ECHO);
  raw.c_cc[VMIN] = 1;
  raw.c_cc[VTIME] = 0;
  active_ = tcsetattr(fd_, TCSANOW, &raw) == 0;
}

RawTerminal::~RawTerminal() {
  if (active_)
    tcsetattr(fd_, TCSANOW, &saved_->attrs);
}

} // namespace intentsynth

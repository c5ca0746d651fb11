#include "cdsr/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

namespace cdsr {

namespace {

bool parse_domain(const std::string& s, Domain* out) {
  if (s == "X") {
    *out = Domain::X;
    return true;
  }
  if (s == "Y") {
    *out = Domain::Y;
    return true;
  }
  return false;
}

bool parse_timestamp(const std::string& s, std::int64_t* out) {
  if (s.empty()) return false;
  std::int64_t v = 0;
  for (char c : s) {
    if (c < '0' || c > '9') return false;
    v = v * 10 + (c - '0');
  }
  *out = v;
  return true;
}

void warn_row(std::size_t line_no, const std::string& why) {
  std::cerr << "warning: row " << line_no << " skipped: " << why << "\n";
}

bool parse_tsv_row(const std::string& line, std::size_t line_no,
                   InteractionRecord* rec) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    if (tab == std::string::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
  if (fields.size() != 4) {
    warn_row(line_no, "expected 4 tab-separated fields, got " +
                          std::to_string(fields.size()));
    return false;
  }
  if (fields[0].empty() || fields[1].empty()) {
    warn_row(line_no, "empty user or item id");
    return false;
  }
  if (!parse_domain(fields[2], &rec->domain)) {
    warn_row(line_no, "unknown domain '" + fields[2] + "'");
    return false;
  }
  if (!parse_timestamp(fields[3], &rec->timestamp)) {
    warn_row(line_no, "bad timestamp '" + fields[3] + "'");
    return false;
  }
  rec->user_id = fields[0];
  rec->item_id = fields[1];
  return true;
}

bool parse_jsonl_row(const std::string& line, std::size_t line_no,
                     InteractionRecord* rec) {
  nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    warn_row(line_no, "invalid json object");
    return false;
  }
  if (!j.contains("user_id") || !j.contains("item_id") || !j.contains("domain") ||
      !j.contains("timestamp")) {
    warn_row(line_no, "missing field");
    return false;
  }
  if (!j["user_id"].is_string() || !j["item_id"].is_string() ||
      !j["domain"].is_string() || !j["timestamp"].is_number_integer()) {
    warn_row(line_no, "field type mismatch");
    return false;
  }
  if (!parse_domain(j["domain"].get<std::string>(), &rec->domain)) {
    warn_row(line_no, "unknown domain '" + j["domain"].get<std::string>() + "'");
    return false;
  }
  const std::int64_t ts = j["timestamp"].get<std::int64_t>();
  if (ts < 0) {
    warn_row(line_no, "negative timestamp");
    return false;
  }
  rec->user_id = j["user_id"].get<std::string>();
  rec->item_id = j["item_id"].get<std::string>();
  rec->timestamp = ts;
  return true;
}

}  // namespace

std::vector<InteractionRecord> load_interactions(const std::string& path,
                                                 InputFormat format,
                                                 LoadReport* report) {
  std::ifstream f(path);
  check(f.good(), "cannot open interaction file: " + path);
  std::vector<InteractionRecord> records;
  LoadReport rep;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(f, line)) {
    ++line_no;
    if (line.empty()) continue;
    ++rep.rows;
    InteractionRecord rec;
    const bool ok = format == InputFormat::Tsv ? parse_tsv_row(line, line_no, &rec)
                                               : parse_jsonl_row(line, line_no, &rec);
    if (ok) {
      ++rep.parsed;
      records.push_back(std::move(rec));
    } else {
      ++rep.malformed;
    }
  }
  if (report) *report = rep;
  return records;
}

FilterReport& FilterReport::operator+=(const FilterReport& o) {
  users_removed += o.users_removed;
  items_removed += o.items_removed;
  records_after_user_filter += o.records_after_user_filter;
  records_after_item_filter += o.records_after_item_filter;
  windows_formed += o.windows_formed;
  windows_dropped_min_domain += o.windows_dropped_min_domain;
  sequences_truncated += o.sequences_truncated;
  sequences_emitted += o.sequences_emitted;
  timestamp_ties += o.timestamp_ties;
  users_without_eval += o.users_without_eval;
  return *this;
}

std::vector<RawSequence> build_sequences(const std::vector<InteractionRecord>& records,
                                         const CorpusOptions& options,
                                         FilterReport* report) {
  check(options.max_len > 0, "max_len must be positive");
  check(options.min_per_domain >= 0, "min_per_domain must be >= 0");
  FilterReport rep;

  // Activity floor, one pass: users first, then items over what remains.
  std::unordered_map<std::string, int> user_counts;
  for (const auto& r : records) ++user_counts[r.user_id];
  std::unordered_set<std::string> kept_users;
  for (const auto& [u, n] : user_counts) {
    if (n >= options.min_interactions) kept_users.insert(u);
  }
  rep.users_removed = user_counts.size() - kept_users.size();

  std::unordered_map<std::string, int> item_counts;
  for (const auto& r : records) {
    if (kept_users.count(r.user_id)) {
      ++rep.records_after_user_filter;
      ++item_counts[r.item_id];
    }
  }
  std::unordered_set<std::string> kept_items;
  for (const auto& [it, n] : item_counts) {
    if (n >= options.min_interactions) kept_items.insert(it);
  }
  rep.items_removed = item_counts.size() - kept_items.size();

  // Group per user, preserving file order for the timestamp tie-break.
  std::vector<std::string> user_order;
  std::unordered_map<std::string, std::vector<SequenceEvent>> per_user;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (!kept_users.count(r.user_id) || !kept_items.count(r.item_id)) continue;
    ++rep.records_after_item_filter;
    auto [it, inserted] = per_user.try_emplace(r.user_id);
    if (inserted) user_order.push_back(r.user_id);
    it->second.push_back(SequenceEvent{r.item_id, r.domain, r.timestamp, i});
  }

  std::vector<RawSequence> out;
  for (const auto& user : user_order) {
    auto& events = per_user[user];
    std::stable_sort(events.begin(), events.end(),
                     [](const SequenceEvent& a, const SequenceEvent& b) {
                       return a.timestamp < b.timestamp;
                     });
    for (std::size_t i = 1; i < events.size(); ++i) {
      if (events[i].timestamp == events[i - 1].timestamp) ++rep.timestamp_ties;
    }

    // A window is a maximal run starting at its first event and absorbing
    // events with timestamp < start + window_seconds.
    std::size_t begin = 0;
    while (begin < events.size()) {
      std::size_t end = begin + 1;
      const std::int64_t window_start = events[begin].timestamp;
      while (end < events.size() &&
             events[end].timestamp < window_start + options.window_seconds) {
        ++end;
      }
      ++rep.windows_formed;

      RawSequence seq;
      seq.user_id = user;
      std::size_t first = begin;
      if (end - begin > static_cast<std::size_t>(options.max_len)) {
        first = end - static_cast<std::size_t>(options.max_len);
        ++rep.sequences_truncated;
      }
      seq.events.assign(events.begin() + static_cast<std::ptrdiff_t>(first),
                        events.begin() + static_cast<std::ptrdiff_t>(end));

      int nx = 0;
      int ny = 0;
      for (const auto& e : seq.events) (e.domain == Domain::X ? nx : ny)++;
      if (nx >= options.min_per_domain && ny >= options.min_per_domain) {
        out.push_back(std::move(seq));
        ++rep.sequences_emitted;
      } else {
        ++rep.windows_dropped_min_domain;
      }
      begin = end;
    }
  }
  if (report) *report += rep;
  return out;
}

SplitResult temporal_split(const std::vector<RawSequence>& sequences,
                           FilterReport* report) {
  // Group per user preserving first-appearance order; windows are emitted
  // chronologically per user, so the last entry is the user's latest.
  std::vector<std::string> user_order;
  std::unordered_map<std::string, std::vector<const RawSequence*>> per_user;
  for (const auto& s : sequences) {
    auto [it, inserted] = per_user.try_emplace(s.user_id);
    if (inserted) user_order.push_back(s.user_id);
    it->second.push_back(&s);
  }

  SplitResult result;
  FilterReport rep;
  for (const auto& user : user_order) {
    auto& seqs = per_user[user];
    std::size_t latest = 0;
    for (std::size_t i = 1; i < seqs.size(); ++i) {
      if (seqs[i]->last_timestamp() >= seqs[latest]->last_timestamp()) latest = i;
    }
    if (seqs.size() == 1) {
      result.train.push_back(*seqs[0]);
      ++rep.users_without_eval;
      continue;
    }
    const bool to_valid = (fnv1a64(user) & 1ULL) == 0;
    for (std::size_t i = 0; i < seqs.size(); ++i) {
      if (i == latest) {
        (to_valid ? result.valid : result.test).push_back(*seqs[i]);
      } else {
        result.train.push_back(*seqs[i]);
      }
    }
  }
  if (report) *report += rep;
  return result;
}

ItemVocabulary build_vocabulary(const std::vector<RawSequence>& sequences) {
  ItemVocabulary v;
  for (const auto& s : sequences) {
    for (const auto& e : s.events) {
      if (e.domain == Domain::X) {
        if (v.x_index.try_emplace(e.item_id, v.x_count()).second) {
          v.x_ids.push_back(e.item_id);
        }
      } else {
        if (v.y_index.try_emplace(e.item_id, v.y_count()).second) {
          v.y_ids.push_back(e.item_id);
        }
      }
    }
  }
  return v;
}

CrossDomainSequence index_sequence(const RawSequence& raw, const ItemVocabulary& vocab) {
  CrossDomainSequence s;
  s.user_id = raw.user_id;
  const int pad = vocab.pad_token();
  for (const auto& e : raw.events) {
    int merged = -1;
    if (e.domain == Domain::X) {
      auto it = vocab.x_index.find(e.item_id);
      check(it != vocab.x_index.end(), "item not in vocabulary: " + e.item_id);
      merged = vocab.merged_of(Domain::X, it->second);
    } else {
      auto it = vocab.y_index.find(e.item_id);
      check(it != vocab.y_index.end(), "item not in vocabulary: " + e.item_id);
      merged = vocab.merged_of(Domain::Y, it->second);
    }
    s.items.push_back(merged);
    s.domains.push_back(e.domain);
    s.x_view.push_back(e.domain == Domain::X ? merged : pad);
    s.y_view.push_back(e.domain == Domain::Y ? merged : pad);
    s.timestamps.push_back(e.timestamp);
  }
  return s;
}

std::vector<CrossDomainSequence> index_sequences(const std::vector<RawSequence>& raws,
                                                 const ItemVocabulary& vocab) {
  std::vector<CrossDomainSequence> out;
  out.reserve(raws.size());
  for (const auto& r : raws) out.push_back(index_sequence(r, vocab));
  return out;
}

std::vector<int> CrossDomainSequence::x_view_rows(const ItemVocabulary& v) const {
  std::vector<int> rows(x_view.size());
  for (std::size_t i = 0; i < x_view.size(); ++i) {
    rows[i] = x_view[i] == v.pad_token() ? v.x_count() : v.local_of(x_view[i], Domain::X);
  }
  return rows;
}

std::vector<int> CrossDomainSequence::y_view_rows(const ItemVocabulary& v) const {
  std::vector<int> rows(y_view.size());
  for (std::size_t i = 0; i < y_view.size(); ++i) {
    rows[i] = y_view[i] == v.pad_token() ? v.y_count() : v.local_of(y_view[i], Domain::Y);
  }
  return rows;
}

TransitionGraph build_transition_graphs(const std::vector<CrossDomainSequence>& train,
                                        const ItemVocabulary& vocab) {
  TransitionGraph g;
  g.x_nodes = vocab.x_count();
  g.y_nodes = vocab.y_count();
  for (const auto& s : train) {
    int prev_merged = -1;
    int prev_x = -1;
    int prev_y = -1;
    for (std::size_t t = 0; t < s.items.size(); ++t) {
      const int merged = s.items[t];
      if (prev_merged >= 0) g.merged_edges.emplace_back(prev_merged, merged);
      if (s.domains[t] == Domain::X) {
        const int local = vocab.local_of(merged, Domain::X);
        if (prev_x >= 0) g.x_edges.emplace_back(prev_x, local);
        prev_x = local;
      } else {
        const int local = vocab.local_of(merged, Domain::Y);
        if (prev_y >= 0) g.y_edges.emplace_back(prev_y, local);
        prev_y = local;
      }
      prev_merged = merged;
    }
  }
  auto dedupe = [](std::vector<std::pair<int, int>>& edges) {
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  };
  dedupe(g.x_edges);
  dedupe(g.y_edges);
  dedupe(g.merged_edges);
  return g;
}

double PreparedCorpus::average_length() const {
  std::size_t total = 0;
  std::size_t n = 0;
  for (const auto* split : {&train, &valid, &test}) {
    for (const auto& s : *split) {
      total += s.items.size();
      ++n;
    }
  }
  return n == 0 ? 0.0 : static_cast<double>(total) / static_cast<double>(n);
}

std::size_t PreparedCorpus::eval_cases(const std::vector<CrossDomainSequence>& split,
                                       Domain d) const {
  std::size_t n = 0;
  for (const auto& s : split) {
    if (!s.domains.empty() && s.domains.back() == d) ++n;
  }
  return n;
}

PreparedCorpus prepare_corpus(const std::vector<InteractionRecord>& records,
                              const CorpusOptions& options) {
  PreparedCorpus corpus;
  corpus.options = options;
  const auto raws = build_sequences(records, options, &corpus.report);
  const auto split = temporal_split(raws, &corpus.report);
  corpus.vocab = build_vocabulary(raws);
  corpus.train = index_sequences(split.train, corpus.vocab);
  corpus.valid = index_sequences(split.valid, corpus.vocab);
  corpus.test = index_sequences(split.test, corpus.vocab);
  corpus.graphs = build_transition_graphs(corpus.train, corpus.vocab);
  return corpus;
}

}  // namespace cdsr

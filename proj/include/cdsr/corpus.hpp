#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "cdsr/common.hpp"
#include "cdsr/graph.hpp"

namespace cdsr {

// One (user, item, domain, timestamp) event, the ingestion atom.
struct InteractionRecord {
  std::string user_id;
  std::string item_id;
  Domain domain{Domain::X};
  std::int64_t timestamp{0};
};

enum class InputFormat { Tsv, Jsonl };

struct LoadReport {
  std::size_t rows{0};
  std::size_t parsed{0};
  std::size_t malformed{0};
};

// Rows missing a field, with an unknown domain, or with a negative timestamp
// are skipped with a warning and counted. Unreadable file is fatal.
std::vector<InteractionRecord> load_interactions(const std::string& path,
                                                 InputFormat format,
                                                 LoadReport* report = nullptr);

// Item ids mapped to contiguous indices, X items first. The merged index of
// a Y item is its Y index + |X|. pad_token() sits outside both ranges.
struct ItemVocabulary {
  std::vector<std::string> x_ids;  // X index -> id
  std::vector<std::string> y_ids;  // Y index -> id
  std::unordered_map<std::string, int> x_index;
  std::unordered_map<std::string, int> y_index;

  int x_count() const { return static_cast<int>(x_ids.size()); }
  int y_count() const { return static_cast<int>(y_ids.size()); }
  int merged_count() const { return x_count() + y_count(); }
  int pad_token() const { return merged_count(); }
  int merged_of(Domain d, int local) const {
    return d == Domain::X ? local : x_count() + local;
  }
  // Local index within the item's own domain.
  int local_of(int merged, Domain d) const {
    return d == Domain::X ? merged : merged - x_count();
  }
};

struct SequenceEvent {
  std::string item_id;
  Domain domain{Domain::X};
  std::int64_t timestamp{0};
  std::size_t file_index{0};  // tie-break provenance
};

// One user window before vocabulary indexing.
struct RawSequence {
  std::string user_id;
  std::vector<SequenceEvent> events;
  std::int64_t last_timestamp() const { return events.back().timestamp; }
};

// A user's merged chronological sequence plus the padded per-domain views.
// Views live in merged index space with pad_token at out-of-domain slots.
struct CrossDomainSequence {
  std::string user_id;
  std::vector<int> items;  // merged indices
  std::vector<Domain> domains;
  std::vector<int> x_view;
  std::vector<int> y_view;
  std::vector<std::int64_t> timestamps;  // empty after reload from disk

  int length() const { return static_cast<int>(items.size()); }
  // Row indices into the domain embedding table (pad row = domain size).
  std::vector<int> x_view_rows(const ItemVocabulary& v) const;
  std::vector<int> y_view_rows(const ItemVocabulary& v) const;
};

struct CorpusOptions {
  std::int64_t window_seconds = 365LL * 86400;
  int min_per_domain = 3;
  int max_len = 30;
  int min_interactions = 10;  // user/item activity floor, applied once
};

struct FilterReport {
  std::size_t users_removed{0};
  std::size_t items_removed{0};
  std::size_t records_after_user_filter{0};
  std::size_t records_after_item_filter{0};
  std::size_t windows_formed{0};
  std::size_t windows_dropped_min_domain{0};
  std::size_t sequences_truncated{0};
  std::size_t sequences_emitted{0};
  std::size_t timestamp_ties{0};
  std::size_t users_without_eval{0};

  FilterReport& operator+=(const FilterReport& o);
};

// Activity filter (users then items, one pass), per-user windowing, sort by
// (timestamp, file order), truncation to the most recent max_len events,
// then the per-domain minimum filter on the truncated window.
std::vector<RawSequence> build_sequences(const std::vector<InteractionRecord>& records,
                                         const CorpusOptions& options,
                                         FilterReport* report = nullptr);

struct SplitResult {
  std::vector<RawSequence> train;
  std::vector<RawSequence> valid;
  std::vector<RawSequence> test;
};

// Per user: the latest sequence goes to valid or test by user-id hash
// parity; everything earlier goes to train. Single-sequence users train only.
SplitResult temporal_split(const std::vector<RawSequence>& sequences,
                           FilterReport* report = nullptr);

// First-appearance order over the given sequences (corpus-global: call with
// the full pre-split list).
ItemVocabulary build_vocabulary(const std::vector<RawSequence>& sequences);

CrossDomainSequence index_sequence(const RawSequence& raw, const ItemVocabulary& vocab);
std::vector<CrossDomainSequence> index_sequences(const std::vector<RawSequence>& raws,
                                                 const ItemVocabulary& vocab);

// Directed adjacency over next-item pairs; x/y edges use domain-local ids.
struct TransitionGraph {
  int x_nodes{0};
  int y_nodes{0};
  std::vector<std::pair<int, int>> x_edges;
  std::vector<std::pair<int, int>> y_edges;
  std::vector<std::pair<int, int>> merged_edges;

  int merged_nodes() const { return x_nodes + y_nodes; }
};

// Built from the train split only.
TransitionGraph build_transition_graphs(const std::vector<CrossDomainSequence>& train,
                                        const ItemVocabulary& vocab);

struct PreparedCorpus {
  ItemVocabulary vocab;
  std::vector<CrossDomainSequence> train;
  std::vector<CrossDomainSequence> valid;
  std::vector<CrossDomainSequence> test;
  TransitionGraph graphs;
  CorpusOptions options;
  FilterReport report;
  LoadReport load_report;

  double average_length() const;
  // Eval sequence counts by held-out item domain, as reported in stats.
  std::size_t eval_cases(const std::vector<CrossDomainSequence>& split, Domain d) const;
};

PreparedCorpus prepare_corpus(const std::vector<InteractionRecord>& records,
                              const CorpusOptions& options);

// Versioned on-disk layout: vocab.json, {train,valid,test}.seq,
// graph_{x,y,merged}.edges, corpus.json (stats).
void save_corpus(const PreparedCorpus& corpus, const std::string& dir);
PreparedCorpus load_corpus(const std::string& dir);

std::string corpus_stats_json(const PreparedCorpus& corpus);

// Content fingerprint over the directory's corpus files (or a single file).
std::string fingerprint_file(const std::string& path);
std::string fingerprint_corpus_dir(const std::string& dir);

}  // namespace cdsr

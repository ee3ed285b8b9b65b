#include "nqreader/data.hpp"

#include <fstream>

#include <json.hpp>

namespace nqreader {

using nlohmann::json;

Index Page::total_tokens() const {
  Index total = 0;
  for (const ParagraphText& p : paragraphs) total += static_cast<Index>(p.tokens.size());
  return total;
}

void Page::validate() const {
  if (question.empty()) throw DataError("page " + page_id + ": empty question");
  if (paragraphs.empty()) throw DataError("page " + page_id + ": no paragraphs");
  for (const ParagraphText& p : paragraphs)
    if (p.tokens.empty())
      throw DataError("page " + page_id + ": paragraph " + std::to_string(p.pid) + " is empty");
  if (!gold) return;

  bool pid_known = false;
  for (const ParagraphText& p : paragraphs) pid_known = pid_known || p.pid == gold->long_pid;
  if (!pid_known)
    throw DataError("page " + page_id + ": gold paragraph " + std::to_string(gold->long_pid) +
                    " not present");
  if (gold->type == AnswerType::kNull)
    throw DataError("page " + page_id + ": NULL pages must omit the gold record");
  if (gold->type == AnswerType::kShort) {
    if (!gold->short_span) throw DataError("page " + page_id + ": SHORT gold needs a span");
    auto [s, e] = *gold->short_span;
    if (s < 0 || s >= e || e > total_tokens())
      throw DataError("page " + page_id + ": gold span outside the page");
    Index para_begin = 0;
    for (const ParagraphText& p : paragraphs) {
      Index para_end = para_begin + static_cast<Index>(p.tokens.size());
      if (p.pid == gold->long_pid) {
        if (s < para_begin || e > para_end)
          throw DataError("page " + page_id + ": gold span outside its long paragraph");
        break;
      }
      para_begin = para_end;
    }
  } else if (gold->short_span) {
    throw DataError("page " + page_id + ": only SHORT gold carries a span");
  }
}

std::vector<std::pair<Index, Index>> split_document(Index total_tokens, Index window,
                                                    Index stride) {
  if (total_tokens < 1) throw DataError("split_document: document is empty");
  if (window < 1 || stride < 1 || stride > window)
    throw ConfigError("split_document: need 1 <= stride <= window");
  std::vector<std::pair<Index, Index>> spans;
  for (Index start = 0;; start += stride) {
    spans.emplace_back(start, std::min(start + window, total_tokens));
    if (start + window >= total_tokens) break;
  }
  return spans;
}

std::vector<InstanceTuple> build_instances(const Page& page, const PipelineConfig& config) {
  page.validate();

  // paragraph start offsets within the page token stream
  std::vector<Index> para_start(page.paragraphs.size());
  Index running = 0;
  for (std::size_t p = 0; p < page.paragraphs.size(); ++p) {
    para_start[p] = running;
    running += static_cast<Index>(page.paragraphs[p].tokens.size());
  }
  const Index total = running;

  std::vector<TokenId> page_tokens;
  page_tokens.reserve(static_cast<std::size_t>(total));
  for (const ParagraphText& p : page.paragraphs)
    page_tokens.insert(page_tokens.end(), p.tokens.begin(), p.tokens.end());

  std::vector<InstanceTuple> instances;
  const auto spans = split_document(total, config.window, config.stride);
  for (std::size_t si = 0; si < spans.size(); ++si) {
    const auto [begin, end] = spans[si];
    InstanceTuple inst;
    inst.page_id = page.page_id;
    inst.span_id = static_cast<Index>(si);
    inst.span_offset = begin;
    inst.question = page.question;
    inst.document.assign(page_tokens.begin() + begin, page_tokens.begin() + end);

    // local paragraph structure: clipped paragraphs keep their page-level id
    std::vector<Index> seg_entries(static_cast<std::size_t>(end - begin));
    std::vector<Index> local_pids;
    Index local = -1;
    Index previous_para = -1;
    for (Index t = begin; t < end; ++t) {
      std::size_t p = static_cast<std::size_t>(previous_para < 0 ? 0 : previous_para);
      while (p + 1 < para_start.size() && para_start[p + 1] <= t) ++p;
      if (static_cast<Index>(p) != previous_para) {
        previous_para = static_cast<Index>(p);
        ++local;
        local_pids.push_back(page.paragraphs[p].pid);
      }
      seg_entries[static_cast<std::size_t>(t - begin)] = local;
    }
    inst.seg = ParagraphMap(seg_entries);
    inst.paragraph_ids = std::move(local_pids);

    // window labels
    TargetLabels targets;
    if (page.gold) {
      const GoldLabel& gold = *page.gold;
      Index gold_local = kNullTarget;
      for (std::size_t li = 0; li < inst.paragraph_ids.size(); ++li)
        if (inst.paragraph_ids[li] == gold.long_pid) gold_local = static_cast<Index>(li);

      std::size_t gold_index = 0;
      for (std::size_t p = 0; p < page.paragraphs.size(); ++p)
        if (page.paragraphs[p].pid == gold.long_pid) gold_index = p;
      const Index gold_head = para_start[gold_index];

      if (gold.type == AnswerType::kShort && gold.short_span &&
          gold.short_span->first >= begin && gold.short_span->second <= end) {
        targets.type = AnswerType::kShort;
        targets.paragraph = gold_local;
        targets.span_start = gold.short_span->first - begin;
        targets.span_end = gold.short_span->second - 1 - begin;
      } else if (gold_head >= begin && gold_head < end) {
        // no usable span in this window; keep the paragraph-level label
        targets.type = gold.type == AnswerType::kShort ? AnswerType::kLong : gold.type;
        targets.paragraph = gold_local;
      }
    }
    targets.validate();
    inst.targets = targets;
    instances.push_back(std::move(inst));
  }
  return instances;
}

std::vector<InstanceTuple> subsample_negatives(std::vector<InstanceTuple> instances,
                                               Scalar keep_p, std::uint64_t seed) {
  if (keep_p <= 0.0 || keep_p > 1.0)
    throw ConfigError("subsample_negatives: keep_p must be in (0, 1]");
  Rng rng(seed);
  std::vector<InstanceTuple> kept;
  kept.reserve(instances.size());
  for (InstanceTuple& inst : instances) {
    if (inst.targets.type != AnswerType::kNull) {
      kept.push_back(std::move(inst));
    } else if (rng.uniform() < keep_p) {
      kept.push_back(std::move(inst));
    }
  }
  return kept;
}

namespace {

// Token layout: 0 CLS, 1 SEP, 2..3 question template; fillers and planted key
// phrases draw from disjoint halves of the rest so a plant is unambiguous.
constexpr TokenId kQuestionHead = 2;
constexpr TokenId kQuestionVerb = 3;
constexpr TokenId kContentBase = 4;

TokenId draw_filler(Rng& rng, Index vocab) {
  Index half = (vocab - kContentBase) / 2;
  return kContentBase + static_cast<TokenId>(rng.integer(static_cast<std::uint64_t>(half)));
}

TokenId draw_key(Rng& rng, Index vocab) {
  Index half = (vocab - kContentBase) / 2;
  Index pool = vocab - kContentBase - half;
  return kContentBase + static_cast<TokenId>(half) +
         static_cast<TokenId>(rng.integer(static_cast<std::uint64_t>(pool)));
}

}  // namespace

std::vector<Page> generate_corpus(const SyntheticConfig& config) {
  if (config.pages < 1 || config.paragraphs_per_page < 1 || config.tokens_per_paragraph < 8)
    throw ConfigError("generate_corpus: need pages >= 1, paragraphs >= 1, tokens >= 8");
  if (config.vocab < 16) throw ConfigError("generate_corpus: vocab must be >= 16");
  if (config.null_fraction < 0 || config.long_only_fraction < 0 || config.yes_no_fraction < 0 ||
      config.null_fraction + config.long_only_fraction + config.yes_no_fraction > 1.0)
    throw ConfigError("generate_corpus: fractions must be non-negative and sum to <= 1");

  Rng rng(config.seed);
  std::vector<Page> pages;
  pages.reserve(static_cast<std::size_t>(config.pages));

  for (Index pi = 0; pi < config.pages; ++pi) {
    Page page;
    page.page_id = "page-" + std::to_string(pi);
    for (Index p = 0; p < config.paragraphs_per_page; ++p) {
      ParagraphText para;
      para.pid = p;
      para.tokens.resize(static_cast<std::size_t>(config.tokens_per_paragraph));
      for (TokenId& t : para.tokens) t = draw_filler(rng, config.vocab);
      page.paragraphs.push_back(std::move(para));
    }

    Scalar category = rng.uniform();
    AnswerType type;
    if (category < config.null_fraction) {
      type = AnswerType::kNull;
    } else if (category < config.null_fraction + config.long_only_fraction) {
      type = AnswerType::kLong;
    } else if (category <
               config.null_fraction + config.long_only_fraction + config.yes_no_fraction) {
      type = rng.uniform() < 0.5 ? AnswerType::kYes : AnswerType::kNo;
    } else {
      type = AnswerType::kShort;
    }

    const Index key_len = 3 + static_cast<Index>(rng.integer(3));  // 3..5 tokens
    std::vector<TokenId> key(static_cast<std::size_t>(key_len));
    for (TokenId& t : key) t = draw_key(rng, config.vocab);

    page.question = {kQuestionHead, kQuestionVerb};
    page.question.insert(page.question.end(), key.begin(), key.end());

    if (type != AnswerType::kNull) {
      Index target = static_cast<Index>(rng.integer(
          static_cast<std::uint64_t>(config.paragraphs_per_page)));
      Index position = static_cast<Index>(rng.integer(
          static_cast<std::uint64_t>(config.tokens_per_paragraph - key_len + 1)));
      std::vector<TokenId>& tokens = page.paragraphs[static_cast<std::size_t>(target)].tokens;
      for (Index k = 0; k < key_len; ++k)
        tokens[static_cast<std::size_t>(position + k)] = key[static_cast<std::size_t>(k)];

      GoldLabel gold;
      gold.long_pid = target;
      gold.type = type;
      if (type == AnswerType::kShort) {
        Index page_start = target * config.tokens_per_paragraph + position;
        gold.short_span = std::make_pair(page_start, page_start + key_len);
      }
      page.gold = gold;
    }
    page.validate();
    pages.push_back(std::move(page));
  }
  return pages;
}

namespace {

json page_to_json(const Page& page) {
  json j;
  j["page_id"] = page.page_id;
  j["question"] = page.question;
  json paragraphs = json::array();
  for (const ParagraphText& p : page.paragraphs)
    paragraphs.push_back({{"pid", p.pid}, {"tokens", p.tokens}});
  j["paragraphs"] = std::move(paragraphs);
  if (page.gold) {
    json gold;
    gold["long_pid"] = page.gold->long_pid;
    if (page.gold->short_span)
      gold["short"] = {page.gold->short_span->first, page.gold->short_span->second};
    else
      gold["short"] = nullptr;
    gold["type"] = static_cast<int>(page.gold->type);
    j["gold"] = std::move(gold);
  } else {
    j["gold"] = nullptr;
  }
  return j;
}

Page page_from_json(const json& j) {
  Page page;
  page.page_id = j.at("page_id").get<std::string>();
  page.question = j.at("question").get<std::vector<TokenId>>();
  for (const json& pj : j.at("paragraphs")) {
    ParagraphText p;
    p.pid = pj.at("pid").get<Index>();
    p.tokens = pj.at("tokens").get<std::vector<TokenId>>();
    page.paragraphs.push_back(std::move(p));
  }
  if (j.contains("gold") && !j.at("gold").is_null()) {
    const json& gj = j.at("gold");
    GoldLabel gold;
    gold.long_pid = gj.at("long_pid").get<Index>();
    if (gj.contains("short") && !gj.at("short").is_null()) {
      auto span = gj.at("short").get<std::vector<Index>>();
      if (span.size() != 2) throw DataError("gold short span must be [start, end)");
      gold.short_span = std::make_pair(span[0], span[1]);
    }
    gold.type = answer_type_from_int(gj.at("type").get<int>());
    page.gold = gold;
  }
  page.validate();
  return page;
}

}  // namespace

std::vector<Page> load_pages(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset: " + path);
  std::vector<Page> pages;
  std::string line;
  long line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty()) continue;
    try {
      pages.push_back(page_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw DataError(path + " line " + std::to_string(line_number) + ": " + e.what());
    } catch (const DataError& e) {
      throw DataError(path + " line " + std::to_string(line_number) + ": " + e.what());
    }
  }
  return pages;
}

void save_pages(const std::vector<Page>& pages, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write dataset: " + path);
  for (const Page& page : pages) out << page_to_json(page).dump() << "\n";
}

}  // namespace nqreader

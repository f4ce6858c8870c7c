#include "anchorpt/synthetic.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>

#include "anchorpt/error.hpp"
#include "anchorpt/rng.hpp"
#include "anchorpt/stopwords.hpp"

namespace anchorpt {
namespace {

constexpr const char* kOnsets[] = {"b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br", "st", "tr", "gl"};
constexpr const char* kVowels[] = {"a", "e", "i", "o", "u", "ai", "ou"};
constexpr const char* kFiller[] = {"the", "of", "and", "in", "a", "with", "to", "is", "by", "for"};

class WordFactory {
 public:
  explicit WordFactory(Rng& rng) : rng_(rng) {
    const auto stopwords = StopwordList::english();
    for (const auto& w : stopwords.words()) used_.insert(w);
  }

  std::string next(std::size_t syllables) {
    for (;;) {
      std::string w;
      for (std::size_t s = 0; s < syllables; ++s) {
        w += kOnsets[uniform_index(rng_, std::size(kOnsets))];
        w += kVowels[uniform_index(rng_, std::size(kVowels))];
      }
      if (uniform01(rng_) < 0.5) w += kOnsets[uniform_index(rng_, std::size(kOnsets))];
      if (used_.insert(w).second) return w;
    }
  }

 private:
  Rng& rng_;
  std::set<std::string> used_;
};

struct PagePlan {
  std::string id;
  std::size_t topic = 0;
  std::vector<std::string> title_words;
  std::vector<std::string> signature;
  bool short_page = false;

  std::string title() const {
    std::string t;
    for (const auto& w : title_words) {
      if (!t.empty()) t += ' ';
      t += static_cast<char>(w[0] - 'a' + 'A');
      t += w.substr(1);
    }
    return t;
  }
};

// Accumulates page text and anchor offsets. All generated text is ASCII, so
// byte offsets equal code-point offsets.
class TextBuilder {
 public:
  void word(const std::string& w) {
    space();
    text_ += w;
  }
  void anchor(const std::string& surface, const std::string& target) {
    space();
    anchors_.push_back({text_.size(), text_.size() + surface.size(), surface, target});
    text_ += surface;
  }
  void end_sentence() { text_ += '.'; }
  void paragraph() { text_ += "\n\n"; }

  std::string text() const { return text_; }
  const std::vector<AnchorSpan>& anchors() const { return anchors_; }

 private:
  void space() {
    if (!text_.empty() && text_.back() != '\n') text_ += ' ';
  }
  std::string text_;
  std::vector<AnchorSpan> anchors_;
};

template <class T>
const T& pick(const std::vector<T>& v, Rng& rng) {
  return v[uniform_index(rng, v.size())];
}

std::string capitalized(std::string w) {
  if (!w.empty() && w[0] >= 'a' && w[0] <= 'z') w[0] = static_cast<char>(w[0] - 'a' + 'A');
  return w;
}

}  // namespace

SyntheticData generate_synthetic(const SyntheticOptions& o) {
  if (o.topics < 2 || o.pages_per_topic < 2) throw Error("synthetic corpus needs at least two topics of two pages");
  if (o.candidates < 1 + o.same_topic_candidates || o.same_topic_candidates + 1 > o.pages_per_topic) {
    throw Error("candidate list settings do not fit the corpus shape");
  }
  Rng rng(o.seed);
  WordFactory words(rng);

  std::vector<std::vector<std::string>> topic_words(o.topics);
  for (auto& tw : topic_words) {
    for (std::size_t i = 0; i < o.topic_words; ++i) tw.push_back(words.next(2));
  }
  std::vector<std::string> background;
  for (std::size_t i = 0; i < 40; ++i) background.push_back(words.next(2));

  std::vector<PagePlan> plans;
  for (std::size_t t = 0; t < o.topics; ++t) {
    for (std::size_t k = 0; k < o.pages_per_topic; ++k) {
      PagePlan p;
      p.id = "t" + std::to_string(t) + "p" + std::to_string(k);
      p.topic = t;
      const std::size_t title_len = uniform01(rng) < 0.3 ? 2 : 1;
      for (std::size_t i = 0; i < title_len; ++i) p.title_words.push_back(words.next(3));
      for (std::size_t i = 0; i < o.signature_words; ++i) p.signature.push_back(words.next(3));
      plans.push_back(std::move(p));
    }
  }
  // Ambiguous titles: page 0 of topic t borrows the title of the last page
  // of topic (t + topics / 2).
  for (std::size_t a = 0; a < o.ambiguous_titles && a < o.topics / 2; ++a) {
    const std::size_t other_topic = a + o.topics / 2;
    plans[a * o.pages_per_topic].title_words = plans[other_topic * o.pages_per_topic + o.pages_per_topic - 1].title_words;
  }
  const std::size_t long_pages = plans.size();
  for (std::size_t s = 0; s < o.short_pages; ++s) {
    PagePlan p;
    p.id = "stub" + std::to_string(s);
    p.topic = uniform_index(rng, o.topics);
    p.title_words.push_back(words.next(3));
    p.signature.push_back(words.next(3));
    p.short_page = true;
    plans.push_back(std::move(p));
  }

  std::vector<std::vector<std::size_t>> by_topic(o.topics);
  for (std::size_t i = 0; i < long_pages; ++i) by_topic[plans[i].topic].push_back(i);

  auto filler = [&](TextBuilder& b) { b.word(kFiller[uniform_index(rng, std::size(kFiller))]); };
  // Each body sentence is about one topic: usually the page's own, sometimes
  // another. All its anchors point into that topic.
  auto sentence_topic = [&](const PagePlan& from) -> std::size_t {
    if (uniform01(rng) < o.same_topic_links) return from.topic;
    for (;;) {
      const std::size_t t = uniform_index(rng, o.topics);
      if (t != from.topic) return t;
    }
  };
  auto link_target = [&](const PagePlan& from, std::size_t topic) -> std::size_t {
    if (!from.short_page && uniform01(rng) < 0.04 && o.short_pages > 0) return long_pages + uniform_index(rng, o.short_pages);
    for (;;) {
      const std::size_t i = pick(by_topic[topic], rng);
      if (plans[i].id != from.id) return i;
    }
  };

  SyntheticData data;
  for (const auto& plan : plans) {
    const auto& tw = topic_words[plan.topic];
    TextBuilder b;
    // Summary paragraph: the title with signature and topic words.
    const std::size_t summary_sentences = plan.short_page ? 1 : 3;
    for (std::size_t s = 0; s < summary_sentences; ++s) {
      b.word(plan.title());
      b.word(s == 0 ? "is" : "has");
      filler(b);
      std::vector<std::string> body = {plan.signature[s % plan.signature.size()], pick(tw, rng), pick(tw, rng),
                                       pick(tw, rng), pick(plan.signature, rng)};
      std::shuffle(body.begin(), body.end(), rng);
      for (std::size_t i = 0; i < body.size(); ++i) {
        b.word(body[i]);
        if (i % 2 == 1) filler(b);
      }
      b.end_sentence();
    }
    const std::size_t paragraphs = plan.short_page ? 1 : o.body_paragraphs;
    for (std::size_t p = 0; p < paragraphs; ++p) {
      b.paragraph();
      const std::size_t sentences = plan.short_page ? 1 : o.paragraph_sentences;
      for (std::size_t s = 0; s < sentences; ++s) {
        b.word(capitalized(pick(background, rng)));
        const std::size_t topic = sentence_topic(plan);
        const std::size_t links = 1 + uniform_index(rng, 3);
        for (std::size_t l = 0; l < links; ++l) {
          const PagePlan& target = plans[link_target(plan, topic)];
          filler(b);
          b.word(pick(topic_words[target.topic], rng));
          if (uniform01(rng) < 0.5) b.word(pick(target.signature, rng));
          b.anchor(target.title(), target.id);
          b.word(pick(topic_words[target.topic], rng));
        }
        b.word(pick(topic_words[topic], rng));
        b.word(pick(background, rng));
        b.end_sentence();
      }
    }
    Page page;
    page.id = plan.id;
    page.title = plan.title();
    std::string slug;
    for (const auto& w : plan.title_words) slug += (slug.empty() ? "" : "_") + capitalized(w);
    page.url = "https://toy.wiki/" + slug + "_(" + plan.signature[0] + ")";
    page.text = b.text();
    page.anchors = b.anchors();
    data.pages.push_back(page);
    if (!plan.short_page) data.docs.add({page.id, page.title, page.url, page.text});
  }

  // Ranking benchmark: each query targets one page and is phrased with its
  // title and some signature words.
  std::vector<std::size_t> targets(long_pages);
  for (std::size_t i = 0; i < long_pages; ++i) targets[i] = i;
  std::shuffle(targets.begin(), targets.end(), rng);
  const std::size_t total_queries = std::min(long_pages, o.train_queries + o.test_queries);
  for (std::size_t q = 0; q < total_queries; ++q) {
    const PagePlan& target = plans[targets[q]];
    std::vector<std::string> terms = target.title_words;
    const std::size_t extra = 1 + uniform_index(rng, 2);
    for (std::size_t e = 0; e < extra; ++e) terms.push_back(target.signature[e % target.signature.size()]);
    std::shuffle(terms.begin(), terms.end(), rng);
    std::string text;
    for (const auto& t : terms) text += (text.empty() ? "" : " ") + t;

    std::vector<std::string> cands = {target.id};
    std::vector<std::size_t> same = by_topic[target.topic];
    std::shuffle(same.begin(), same.end(), rng);
    for (std::size_t i : same) {
      if (cands.size() > o.same_topic_candidates) break;
      if (plans[i].id != target.id) cands.push_back(plans[i].id);
    }
    while (cands.size() < o.candidates) {
      const PagePlan& other = plans[uniform_index(rng, long_pages)];
      if (other.topic != target.topic && std::find(cands.begin(), cands.end(), other.id) == cands.end()) {
        cands.push_back(other.id);
      }
    }
    std::shuffle(cands.begin(), cands.end(), rng);

    const bool train = q < o.train_queries;
    const std::string qid = (train ? "train" : "test") + std::to_string(q);
    (train ? data.train_queries : data.test_queries)[qid] = text;
    auto& list = (train ? data.train_candidates : data.test_candidates)[qid];
    for (std::size_t i = 0; i < cands.size(); ++i) {
      list.push_back({cands[i], static_cast<double>(cands.size() - i)});
      data.qrels.set(qid, cands[i], cands[i] == target.id ? 1 : 0);
    }
  }
  return data;
}

void write_synthetic(const SyntheticData& data, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  auto open = [&](const std::string& name) {
    std::ofstream out(fs::path(dir) / name);
    if (!out) throw Error("cannot write '" + (fs::path(dir) / name).string() + "'");
    return out;
  };
  {
    auto out = open("corpus.jsonl");
    write_corpus(HyperlinkCorpus(data.pages), out);
  }
  {
    auto out = open("docs.jsonl");
    write_docs(data.docs, out);
  }
  {
    auto out = open("queries.train.tsv");
    write_queries(data.train_queries, out);
  }
  {
    auto out = open("queries.test.tsv");
    write_queries(data.test_queries, out);
  }
  {
    auto out = open("candidates.train.txt");
    write_candidates(data.train_candidates, out);
  }
  {
    auto out = open("candidates.test.txt");
    write_candidates(data.test_candidates, out);
  }
  {
    auto out = open("qrels.txt");
    write_qrels(data.qrels, out);
  }
}

}  // namespace anchorpt

#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "anchorpt/corpus.hpp"
#include "anchorpt/sampler.hpp"
#include "anchorpt/text.hpp"

namespace testing {

// Page whose anchors are given as (surface, target) and located by the first
// occurrence of the surface at or after the previous anchor.
inline anchorpt::Page page(std::string id, std::string text,
                           std::vector<std::pair<std::string, std::string>> links = {},
                           std::string title = "") {
  anchorpt::Page p;
  p.id = id;
  p.title = title.empty() ? id : title;
  p.url = "https://example.org/" + id;
  p.text = std::move(text);
  const auto offsets = anchorpt::code_point_offsets(p.text);
  std::size_t from = 0;
  for (auto& [surface, target] : links) {
    const auto at = p.text.find(surface, from);
    if (at == std::string::npos) throw std::logic_error("surface not in text: " + surface);
    std::size_t cp_begin = 0;
    while (offsets[cp_begin] < at) ++cp_begin;
    std::size_t cp_end = cp_begin;
    while (offsets[cp_end] < at + surface.size()) ++cp_end;
    p.anchors.push_back({cp_begin, cp_end, surface, target});
    from = at + surface.size();
  }
  return p;
}

inline std::string words(std::size_t n, const std::string& w = "word") {
  std::string out;
  for (std::size_t i = 0; i < n; ++i) out += (i ? " " : "") + w;
  return out;
}

// Attention built by a callback from the sequence length; one layer, one head.
class MockAttention final : public anchorpt::AttentionProvider {
 public:
  using Builder = std::function<anchorpt::Matrix(Eigen::Index n)>;
  explicit MockAttention(Builder build, std::size_t max_len = 64) : build_(std::move(build)), max_len_(max_len) {}

  anchorpt::AttentionMaps attention(std::span<const int> ids, std::span<const int>) const override {
    return {{build_(static_cast<Eigen::Index>(ids.size()))}};
  }
  std::size_t max_len() const override { return max_len_; }

 private:
  Builder build_;
  std::size_t max_len_;
};

// Every row carries the same weight per column: column_weights[j], 0 past the end.
inline MockAttention column_attention(std::vector<double> column_weights, bool row_normalize = true) {
  return MockAttention([column_weights, row_normalize](Eigen::Index n) {
    anchorpt::Matrix m(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
      m.col(j).setConstant(static_cast<std::size_t>(j) < column_weights.size() ? column_weights[j] : 0.0);
    }
    if (row_normalize) {
      for (Eigen::Index i = 0; i < n; ++i) {
        const double s = m.row(i).sum();
        if (s > 0) m.row(i) /= s;
      }
    }
    return m;
  });
}

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& name)
      : path(std::filesystem::temp_directory_path() / ("anchorpt_test_" + name)) {
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::string operator/(const std::string& f) const { return (path / f).string(); }
};

}  // namespace testing

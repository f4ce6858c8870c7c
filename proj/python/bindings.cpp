#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "anchorpt/checkpoint.hpp"
#include "anchorpt/error.hpp"
#include "anchorpt/evalkit.hpp"
#include "anchorpt/pipeline.hpp"
#include "anchorpt/pretrain.hpp"
#include "anchorpt/ranker.hpp"
#include "anchorpt/synthetic.hpp"
#include "anchorpt/text.hpp"

namespace py = pybind11;
using namespace anchorpt;

namespace {

RankedRun to_run(const std::map<std::string, std::vector<std::string>>& ranking) {
  RankedRun run;
  for (const auto& [qid, docs] : ranking) {
    auto& entries = run.queries[qid];
    for (std::size_t i = 0; i < docs.size(); ++i) entries.push_back({docs[i], -static_cast<double>(i)});
  }
  return run;
}

Qrels to_qrels(const std::map<std::string, std::map<std::string, int>>& grades) {
  Qrels qrels;
  for (const auto& [qid, docs] : grades) {
    for (const auto& [doc, g] : docs) qrels.set(qid, doc, g);
  }
  return qrels;
}

DocRecord to_doc(const py::dict& d) {
  auto get = [&](const char* key) { return d.contains(key) ? d[key].cast<std::string>() : std::string{}; };
  return {get("id"), get("title"), get("url"), get("body")};
}

}  // namespace

PYBIND11_MODULE(_anchorpt, m) {
  m.doc() = "Hyperlink-based pre-training pairs, a small transformer encoder and reranking metrics";

  py::register_exception<Error>(m, "AnchorptError", PyExc_RuntimeError);

  m.def("tokenize", &tokenize, py::arg("text"));
  m.def("hinge_loss", &hinge_loss, py::arg("pos"), py::arg("neg"));
  m.def(
      "mlm_loss", [](const Matrix& logits, const std::vector<int>& labels) { return mlm_loss(logits, labels); },
      py::arg("logits"), py::arg("labels"));
  m.def(
      "pack_input",
      [](const std::vector<int>& query, const std::vector<int>& doc, std::size_t max_len) {
        const auto seq = pack_input(query, doc, max_len);
        return py::make_tuple(seq.token_ids, seq.segment_ids);
      },
      py::arg("query_ids"), py::arg("doc_ids"), py::arg("max_len"),
      "Returns (token_ids, segment_ids) for [CLS] query [SEP] doc [SEP].");

  m.def(
      "mrr_at_k",
      [](const std::map<std::string, std::vector<std::string>>& run,
         const std::map<std::string, std::map<std::string, int>>& qrels,
         std::size_t k) { return mrr_at_k(to_run(run), to_qrels(qrels), k).value; },
      py::arg("run"), py::arg("qrels"), py::arg("k"),
      "run: qid -> ranked doc ids; qrels: qid -> {doc id: grade}.");
  m.def(
      "ndcg_at_k",
      [](const std::map<std::string, std::vector<std::string>>& run,
         const std::map<std::string, std::map<std::string, int>>& qrels,
         std::size_t k) { return ndcg_at_k(to_run(run), to_qrels(qrels), k).value; },
      py::arg("run"), py::arg("qrels"), py::arg("k"));

  py::class_<Encoder>(m, "Encoder")
      .def(py::init([](int layers, int heads, int hidden, int ffn_dim, int vocab_size, int max_len,
                       std::uint64_t seed) {
             EncoderConfig c{layers, heads, hidden, ffn_dim, vocab_size, max_len, 0.0};
             c.validate();
             return Encoder(c, init_parameters(c, seed));
           }),
           py::arg("layers"), py::arg("heads"), py::arg("hidden"), py::arg("ffn_dim"), py::arg("vocab_size"),
           py::arg("max_len"), py::arg("seed") = 0)
      .def_static(
          "load", [](const std::string& path) {
            const auto ckpt = load_checkpoint(path);
            return Encoder(ckpt.config, ckpt.params);
          },
          py::arg("path"))
      .def_property_readonly("config", [](const Encoder& e) { return config_to_json(e.config()).dump(); })
      .def_property_readonly("parameter_count", [](const Encoder& e) { return e.params().parameter_count(); })
      .def(
          "encode",
          [](const Encoder& e, const std::vector<int>& ids, const std::vector<int>& segments) {
            auto enc = e.encode(ids, segments);
            return py::make_tuple(enc.hidden, enc.attention);
          },
          py::arg("token_ids"), py::arg("segment_ids"),
          "Returns (hidden [n x d], attention [layer][head] of n x n).")
      .def(
          "cls_score",
          [](const Encoder& e, const std::vector<int>& ids, const std::vector<int>& segments) {
            return e.cls_score(ids, segments);
          },
          py::arg("token_ids"), py::arg("segment_ids"));

  py::class_<Ranker>(m, "Ranker")
      .def_static(
          "load", [](const std::string& path) { return Ranker::from_checkpoint(load_checkpoint(path)); },
          py::arg("path"))
      .def(
          "score", [](const Ranker& r, const std::string& query, const py::dict& doc) { return r.score(query, to_doc(doc)); },
          py::arg("query"), py::arg("doc"), "doc: dict with id, title, url and body.");

  m.def(
      "generate_synthetic",
      [](const std::string& dir, std::uint64_t seed) {
        SyntheticOptions o;
        o.seed = seed;
        write_synthetic(generate_synthetic(o), dir);
      },
      py::arg("dir"), py::arg("seed") = 1);

  m.def(
      "run_command",
      [](const std::string& name, std::optional<std::string> config, std::optional<std::uint64_t> seed,
         std::optional<std::string> profile) {
        const auto resolved = resolve_run_config(config, profile, seed);
        std::ostringstream log;
        {
          py::gil_scoped_release release;
          run_command(name, resolved, log);
        }
        return log.str();
      },
      py::arg("name"), py::arg("config") = py::none(), py::arg("seed") = py::none(),
      py::arg("profile") = py::none(), "Runs one pipeline command (or 'all') and returns its log.");
}

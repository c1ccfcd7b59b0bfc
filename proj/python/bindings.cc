// Python bindings. Configs and reports cross the boundary as JSON text;
// the package's __init__.py turns them into dicts.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "smartreply/autodiff.h"
#include "smartreply/diversify.h"
#include "smartreply/error.h"
#include "smartreply/model_io.h"
#include "smartreply/stages.h"

namespace py = pybind11;
namespace fs = std::filesystem;
using namespace smartreply;

namespace {

SystemConfig ParseConfig(const std::string& json) {
  if (json.empty()) return SystemConfig{};
  return SystemConfig::FromJson(nlohmann::json::parse(json));
}

Tensor FromArray(const py::array_t<float, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 2) throw ContractError("expected a 2-d array");
  Tensor t({static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1))});
  std::copy(a.data(), a.data() + a.size(), t.mutable_data().begin());
  return t;
}

class Models {
 public:
  explicit Models(const fs::path& run) : models_(LoadSuggestionModels(run, &warnings_)) {}

  std::string Suggest(const std::string& message, const std::string& ranker,
                      const std::string& params_json) const {
    PipelineConfig config = params_json.empty()
                                ? PipelineConfig{}
                                : PipelineConfig::FromJson(nlohmann::json::parse(params_json));
    config.Validate();
    SuggestionResult r;
    {
      py::gil_scoped_release release;
      r = smartreply::Suggest(models_, message, ParseRanker(ranker), config);
    }
    nlohmann::json out = r.ToJson();
    out["params"] = config.ToJson();
    return out.dump();
  }

  py::array_t<float> Encode(const std::string& message) const {
    Tensor x = EncodeMessage(models_, message);
    py::array_t<float> out(static_cast<py::ssize_t>(x.size()));
    std::copy(x.data().begin(), x.data().end(), out.mutable_data());
    return out;
  }

  std::size_t responses() const { return models_.artifact.texts.size(); }
  bool has_cvae() const { return models_.cvae.has_value(); }
  const std::vector<std::string>& texts() const { return models_.artifact.texts; }
  const std::vector<std::string>& warnings() const { return warnings_; }

 private:
  std::vector<std::string> warnings_;
  SuggestionModels models_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Smart-reply suggestions: matching, lexical clustering, MMR and M-CVAE.";

  static py::exception<ContractError> contract_error(m, "ContractError", PyExc_ValueError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const IoError& e) {
      PyErr_SetString(PyExc_OSError, e.what());
    } catch (const ContractError& e) {
      contract_error(e.what());
    }
  });

  m.def("default_config", [] { return SystemConfig{}.ToJson().dump(); });
  m.def("validate_config", [](const std::string& json) { return ParseConfig(json).ToJson().dump(); },
        py::arg("config_json"));

  // Lifecycle stages, each over a run directory.
  m.def("generate_corpus",
        [](const std::string& config, const fs::path& run, const std::string& synthetic_json) {
          GenerateCorpusStage(ParseConfig(config), synthetic_json, run);
        },
        py::arg("config_json"), py::arg("run"), py::arg("synthetic_json") = "",
        py::call_guard<py::gil_scoped_release>());
  m.def("train_matching",
        [](const std::string& config, const fs::path& run) {
          return TrainMatchingToRun(ParseConfig(config), run).ToJson().dump();
        },
        py::arg("config_json"), py::arg("run"), py::call_guard<py::gil_scoped_release>());
  m.def("train_lm", [](const std::string& config, const fs::path& run) { TrainLmToRun(ParseConfig(config), run); },
        py::arg("config_json"), py::arg("run"), py::call_guard<py::gil_scoped_release>());
  m.def("build_response_set",
        [](const std::string& config, const fs::path& run) {
          return BuildResponseSetToRun(ParseConfig(config), LexicalTables::Default(), run);
        },
        py::arg("config_json"), py::arg("run"), py::call_guard<py::gil_scoped_release>());
  m.def("train_cvae",
        [](const std::string& config, const fs::path& run) {
          return TrainCvaeToRun(ParseConfig(config), run).ToJson().dump();
        },
        py::arg("config_json"), py::arg("run"), py::call_guard<py::gil_scoped_release>());
  m.def("evaluate",
        [](const std::string& config, const fs::path& run, const std::string& rankers) {
          return EvaluateRun(ParseConfig(config), run, rankers).ToJson().dump();
        },
        py::arg("config_json"), py::arg("run"), py::arg("rankers"),
        py::call_guard<py::gil_scoped_release>());
  m.def("bench",
        [](const std::string& config, const fs::path& run, std::size_t queries, std::size_t warmup) {
          BenchConfig b;
          b.queries = queries;
          b.warmup = warmup;
          return BenchRun(ParseConfig(config), run, b).ToJson().dump();
        },
        py::arg("config_json"), py::arg("run"), py::arg("queries") = 1000, py::arg("warmup") = 100,
        py::call_guard<py::gil_scoped_release>());
  m.def("model_hash", &RunModelHash, py::arg("run"));

  py::class_<Models>(m, "Models")
      .def(py::init<const fs::path&>(), py::arg("run"))
      .def("suggest", &Models::Suggest, py::arg("message"), py::arg("ranker") = "mcvae",
           py::arg("params_json") = "")
      .def("encode", &Models::Encode, py::arg("message"))
      .def_property_readonly("responses", &Models::responses)
      .def_property_readonly("has_cvae", &Models::has_cvae)
      .def_property_readonly("texts", &Models::texts)
      .def_property_readonly("warnings", &Models::warnings);

  // Standalone kernels.
  m.def("tokenize", [](const std::string& text) { return Tokenize(text); }, py::arg("text"));
  m.def("lexical_clusters",
        [](const std::vector<std::string>& texts) { return BuildClusters(texts, LexicalTables::Default()).cluster_of; },
        py::arg("texts"));
  m.def("mmr_rerank",
        [](const std::vector<float>& scores, const py::array_t<float, py::array::c_style | py::array::forcecast>& vectors,
           double beta) {
          MmrResult r = MmrRerank(scores, FromArray(vectors), beta);
          return py::make_tuple(r.order, r.novelty);
        },
        py::arg("scores"), py::arg("vectors"), py::arg("beta"));
  m.def("symmetric_loss",
        [](const py::array_t<float, py::array::c_style | py::array::forcecast>& theta) {
          return ad::SymmetricNllValue(FromArray(theta));
        },
        py::arg("theta"));
}

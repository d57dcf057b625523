// Python module: thin wrappers over the C++ core. Records cross the boundary
// as plain dicts in the same shape as the JSONL files.

#include "prosim/audio.hpp"
#include "prosim/embedding_store.hpp"
#include "prosim/error.hpp"
#include "prosim/pitch.hpp"
#include "prosim/similarity.hpp"
#include "prosim/synthetic.hpp"
#include "prosim/trainer.hpp"
#include "prosim/triad.hpp"

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cstring>

namespace py = pybind11;
using namespace prosim;
using nlohmann::json;

namespace {

py::object to_py(const nlohmann::ordered_json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

json from_py(const py::handle& o) {
  return json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

template <typename T>
py::list to_py_list(const std::vector<T>& rows) {
  py::list out;
  for (const auto& r : rows) out.append(to_py(to_json(r)));
  return out;
}

std::vector<ConsensusTriad> consensus_of(const py::list& rows) {
  std::vector<ConsensusTriad> out;
  for (const auto& r : rows) out.push_back(consensus_from_json(from_py(r)));
  return out;
}

Waveform wave_of(const std::vector<double>& samples, int rate) {
  Waveform w;
  w.samples = samples;
  w.sample_rate = rate;
  return w;
}

PitchContour contour_of(const std::vector<std::optional<double>>& f0, double hop) {
  PitchContour c;
  c.hop_s = hop;
  c.floor_hz = 0.0;
  c.ceil_hz = 1e12;
  for (std::size_t i = 0; i < f0.size(); ++i) c.frames.push_back({hop * static_cast<double>(i), f0[i]});
  return c;
}

MelSpectrogram spec_of(const Eigen::MatrixXd& m) {
  MelSpectrogram s;
  s.frames = m;
  s.n_mels = static_cast<int>(m.cols());
  return s;
}

py::dict agreement_dict(const AgreementResult& r) {
  py::dict d;
  d["percent"] = r.percent;
  d["hits"] = r.hits;
  d["evaluated"] = r.evaluated;
  d["skipped"] = r.skipped;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Core of the prosodic similarity toolkit";
  m.attr("__version__") = PROSIM_VERSION;

  static py::handle error_type = py::exception<Error>(m, "Error", PyExc_RuntimeError).release();
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object inst = py::reinterpret_borrow<py::object>(error_type)(e.what());
      inst.attr("code") = std::string(to_string(e.code()));
      PyErr_SetObject(error_type.ptr(), inst.ptr());
    }
  });

  // audio and pitch
  m.def("load_wav", [](const std::filesystem::path& p) {
    const Waveform w = load_wav(p);
    return py::make_tuple(py::array_t<double>(static_cast<py::ssize_t>(w.samples.size()), w.samples.data()),
                          w.sample_rate);
  }, py::arg("path"), "Mono, peak-normalized samples and the sample rate.");

  m.def("track_pitch", [](const std::vector<double>& samples, int rate, double floor_hz, double ceil_hz,
                          double hop_s) {
    PitchConfig cfg;
    cfg.floor_hz = floor_hz;
    cfg.ceil_hz = ceil_hz;
    cfg.hop_s = hop_s;
    std::vector<std::pair<double, std::optional<double>>> out;
    for (const auto& f : track_pitch(wave_of(samples, rate), cfg).frames) out.emplace_back(f.time_s, f.f0);
    return out;
  }, py::arg("samples"), py::arg("rate"), py::arg("floor_hz") = 75.0, py::arg("ceil_hz") = 600.0,
     py::arg("hop_s") = 0.01, "List of (time_s, f0 or None).");

  py::class_<PitchStats>(m, "PitchStats")
      .def_readonly("mean_hz", &PitchStats::mean_hz)
      .def_readonly("min_hz", &PitchStats::min_hz)
      .def_readonly("max_hz", &PitchStats::max_hz)
      .def_readonly("range_hz", &PitchStats::range_hz)
      .def_readonly("voiced_len", &PitchStats::voiced_len);

  m.def("pitch_stats", [](const std::vector<double>& samples, int rate) {
    return pitch_stats(track_pitch(wave_of(samples, rate)));
  }, py::arg("samples"), py::arg("rate"));

  py::class_<LegendreCoeffs>(m, "LegendreCoeffs")
      .def_property_readonly("c", [](const LegendreCoeffs& l) { return l.c; })
      .def_property_readonly("height", &LegendreCoeffs::height)
      .def_property_readonly("slope", &LegendreCoeffs::slope)
      .def_property_readonly("convexity", &LegendreCoeffs::convexity);

  m.def("fit_legendre", [](const std::vector<std::optional<double>>& f0, double hop_s) {
    return fit_legendre(contour_of(f0, hop_s));
  }, py::arg("f0"), py::arg("hop_s") = 0.01, "Fit P0..P3 to an f0 track; None marks unvoiced frames.");

  // similarity
  m.def("mel_spectrogram", [](const std::vector<double>& samples, int rate, int n_mels) {
    MelConfig cfg;
    cfg.n_mels = n_mels;
    return mel_spectrogram(wave_of(samples, rate), cfg).frames;
  }, py::arg("samples"), py::arg("rate"), py::arg("n_mels") = 80);
  m.def("cosine_similarity", py::overload_cast<const Eigen::VectorXd&, const Eigen::VectorXd&>(&cosine_similarity),
        py::arg("u"), py::arg("v"));
  m.def("spectrogram_similarity", [](const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    return spectrogram_similarity(spec_of(a), spec_of(b));
  }, py::arg("a"), py::arg("b"));
  m.def("spectral_convergence", [](const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    return spectral_convergence(spec_of(a), spec_of(b));
  }, py::arg("a"), py::arg("b"));

  // embedding stacks
  py::class_<EmbeddingStack>(m, "EmbeddingStack")
      .def(py::init([](const std::string& clip_id, const std::string& model_name,
                       py::array_t<float, py::array::c_style | py::array::forcecast> v) {
             if (v.ndim() != 2) throw Error(Errc::ShapeMismatch, "vectors must be n_layers x dim");
             EmbeddingStack s;
             s.clip_id = clip_id;
             s.model_name = model_name;
             s.n_layers = static_cast<std::uint32_t>(v.shape(0));
             s.dim = static_cast<std::uint32_t>(v.shape(1));
             s.vectors.assign(v.data(), v.data() + v.size());
             return s;
           }),
           py::arg("clip_id"), py::arg("model_name"), py::arg("vectors"))
      .def_readonly("clip_id", &EmbeddingStack::clip_id)
      .def_readonly("model_name", &EmbeddingStack::model_name)
      .def_readonly("n_layers", &EmbeddingStack::n_layers)
      .def_readonly("dim", &EmbeddingStack::dim)
      .def_property_readonly("vectors", [](const EmbeddingStack& s) {
        py::array_t<float> a({static_cast<py::ssize_t>(s.n_layers), static_cast<py::ssize_t>(s.dim)});
        std::memcpy(a.mutable_data(), s.vectors.data(), s.vectors.size() * sizeof(float));
        return a;
      })
      .def("layer", &layer_vector, py::arg("index"));

  m.def("encode_stack", [](const EmbeddingStack& s) {
    const auto b = encode_stack(s);
    return py::bytes(reinterpret_cast<const char*>(b.data()), b.size());
  });
  m.def("decode_stack", [](const py::bytes& b) {
    const std::string s = b;
    return decode_stack(std::span(reinterpret_cast<const unsigned char*>(s.data()), s.size()));
  });
  m.def("read_stack", &read_stack, py::arg("path"));
  m.def("write_stack", &write_stack, py::arg("stack"), py::arg("path"));

  // triads and agreement
  m.def("read_manifest", [](const std::filesystem::path& p) { return to_py_list(read_manifest(p).clips); });
  m.def("read_triads", [](const std::filesystem::path& p) { return to_py_list(read_triads(p)); });
  m.def("read_consensus", [](const std::filesystem::path& p) { return to_py_list(read_consensus(p)); });
  m.def("sample_triads", [](const py::list& clips, std::size_t count, std::uint64_t seed) {
    Manifest manifest;
    for (const auto& c : clips) manifest.clips.push_back(clip_from_json(from_py(c)));
    return to_py_list(sample_triads(manifest, count, seed));
  }, py::arg("clips"), py::arg("per_dataset_count"), py::arg("seed") = 17);
  m.def("consensus_filter", [](const py::list& triads, const py::list& judgments, int required) {
    std::vector<Triad> t;
    for (const auto& r : triads) t.push_back(triad_from_json(from_py(r)));
    std::vector<Judgment> j;
    for (const auto& r : judgments) j.push_back(judgment_from_json(from_py(r)));
    return to_py_list(consensus_filter(t, j, required));
  }, py::arg("triads"), py::arg("judgments"), py::arg("required") = kDefaultRatersPerTriad);
  m.def("evaluate_agreement", [](const py::list& consensus, const py::function& scorer) {
    const auto c = consensus_of(consensus);
    const TriadScorer s = [&](const ConsensusTriad& t) -> std::optional<TriadScores> {
      const py::object r = scorer(to_py(to_json(t)));
      if (r.is_none()) return std::nullopt;
      return r.cast<TriadScores>();
    };
    return agreement_dict(evaluate_agreement(c, s));
  }, py::arg("consensus"), py::arg("scorer"),
     "scorer(triad) returns (AB, AC, BC) similarities or None to skip the triad.");

  // training
  m.def("triplet_loss", &triplet_loss, py::arg("anchor"), py::arg("positive"), py::arg("negative"),
        py::arg("margin") = 0.5);

  m.def("synthetic_dataset", [](std::size_t n_clips, std::size_t dim, std::size_t n_triads, std::uint64_t seed) {
    synth::LatentConfig cfg;
    cfg.n_clips = n_clips;
    cfg.dim = dim;
    cfg.n_triads = n_triads;
    cfg.seed = seed;
    const auto d = synth::make_latent_dataset(cfg);
    py::dict out;
    out["consensus"] = to_py_list(d.consensus);
    out["features"] = d.features;
    out["latent"] = d.latent;
    return out;
  }, py::arg("n_clips") = 500, py::arg("dim") = 64, py::arg("n_triads") = 1200, py::arg("seed") = 17,
     "Clips with a known 2-D prosodic latent and simulated unanimous judgments.");

  m.def("run_protocol", [](const py::list& consensus, const FeatureTable& features, std::vector<int> latent_dims,
                           int folds, double holdout, int epochs, int batch, double lr, double margin,
                           int patience, std::uint64_t seed, int jobs) {
    TrainConfig cfg;
    cfg.latent_dims = std::move(latent_dims);
    cfg.folds = folds;
    cfg.holdout_frac = holdout;
    cfg.epochs = epochs;
    cfg.batch_size = batch;
    cfg.learning_rate = lr;
    cfg.margin = margin;
    cfg.patience = patience;
    cfg.seed = seed;
    cfg.jobs = jobs;
    cfg.input = InputSpec::parse("embedding:python:0");
    const auto c = consensus_of(consensus);
    ProtocolResult r;
    {
      py::gil_scoped_release release;
      r = run_protocol(c, features, cfg);
    }
    py::list reports;
    for (std::size_t k = 0; k < r.reports.size(); ++k) {
      const auto& f = r.reports[k];
      py::dict d;
      d["fold"] = f.fold;
      d["latent_dim"] = f.latent_dim;
      d["val_agreement"] = f.val_agreement;
      d["test_agreement"] = f.test_agreement;
      d["final_loss"] = f.final_loss;
      d["n_train"] = f.n_train;
      d["n_val"] = f.n_val;
      d["n_test"] = f.n_test;
      d["rank_deficient"] = f.rank_deficient;
      d["weights"] = r.models[k].weights;
      reports.append(d);
    }
    py::dict out;
    out["reports"] = reports;
    out["raw_holdout"] = agreement_dict(r.raw_holdout);
    out["input_dim"] = r.input_dim;
    return out;
  }, py::arg("consensus"), py::arg("features"), py::arg("latent_dims") = std::vector<int>{2, 8},
     py::arg("folds") = 5, py::arg("holdout") = 0.2, py::arg("epochs") = 200, py::arg("batch") = 32,
     py::arg("lr") = 1e-3, py::arg("margin") = 0.5, py::arg("patience") = 20, py::arg("seed") = 17,
     py::arg("jobs") = 1);
}

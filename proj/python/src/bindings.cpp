#include <cstring>
#include <string>
#include <vector>

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "json.hpp"
#include "semdist/embedding_store.hpp"
#include "semdist/error.hpp"
#include "semdist/gaussian_stats.hpp"
#include "semdist/hnsc.hpp"
#include "semdist/metrics.hpp"
#include "semdist/random.hpp"
#include "semdist/sproj.hpp"

namespace py = pybind11;
using json = nlohmann::json;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

semdist::Role parse_role(const std::string& name) {
  for (auto r : {semdist::Role::text, semdist::Role::real_image, semdist::Role::fake_image,
                 semdist::Role::fake_caption}) {
    if (semdist::to_string(r) == name) return r;
  }
  throw semdist::Error(semdist::ErrorKind::invalid_argument, "unknown role: " + name);
}

semdist::EmbeddingMatrix to_matrix(const FloatArray& a, semdist::Role role) {
  if (a.ndim() != 2) throw semdist::Error(semdist::ErrorKind::shape_mismatch, "expected a 2-D array");
  const auto count = static_cast<std::size_t>(a.shape(0));
  const auto dim = static_cast<std::size_t>(a.shape(1));
  std::vector<float> data(count * dim);
  if (!data.empty()) std::memcpy(data.data(), a.data(), data.size() * sizeof(float));
  return semdist::EmbeddingMatrix(role, dim, count, std::move(data));
}

FloatArray to_array(const semdist::EmbeddingMatrix& m) {
  FloatArray out({m.count(), m.dim()});
  if (!m.data().empty()) std::memcpy(out.mutable_data(), m.data().data(), m.data().size_bytes());
  return out;
}

py::object to_python(const json& j) {
  switch (j.type()) {
    case json::value_t::object: {
      py::dict d;
      for (const auto& [k, v] : j.items()) d[py::str(k)] = to_python(v);
      return std::move(d);
    }
    case json::value_t::array: {
      py::list l;
      for (const auto& v : j) l.append(to_python(v));
      return std::move(l);
    }
    case json::value_t::string: return py::str(j.get<std::string>());
    case json::value_t::boolean: return py::bool_(j.get<bool>());
    case json::value_t::number_integer: return py::int_(j.get<std::int64_t>());
    case json::value_t::number_unsigned: return py::int_(j.get<std::uint64_t>());
    case json::value_t::number_float: return py::float_(j.get<double>());
    default: return py::none();
  }
}

std::vector<semdist::Record> to_records(const std::vector<py::tuple>& rows) {
  std::vector<semdist::Record> records;
  records.reserve(rows.size());
  for (const auto& r : rows) {
    if (r.size() != 5)
      throw semdist::Error(semdist::ErrorKind::invalid_data,
                           "record must be (text, real, fake, image_id, caption_id)");
    records.push_back({r[0].cast<std::size_t>(), r[1].cast<std::size_t>(), r[2].cast<std::size_t>(),
                       r[3].cast<std::string>(), r[4].cast<std::string>()});
  }
  return records;
}

semdist::PairedDataset make_dataset(const FloatArray& text, const FloatArray& real, const FloatArray& fake,
                                    const std::optional<std::vector<py::tuple>>& records) {
  semdist::PairedDataset ds{to_matrix(text, semdist::Role::text), to_matrix(real, semdist::Role::real_image),
                            to_matrix(fake, semdist::Role::fake_image), {}};
  if (records) {
    ds.records = to_records(*records);
  } else {
    if (ds.text.count() != ds.real.count() || ds.text.count() != ds.fake.count())
      throw semdist::Error(semdist::ErrorKind::shape_mismatch,
                           "row counts differ; pass records to pair them explicitly");
    for (std::size_t i = 0; i < ds.text.count(); ++i)
      ds.records.push_back({i, i, i, std::to_string(i), std::to_string(i)});
  }
  ds.validate();
  return ds;
}

semdist::ProjectionTrigger trigger_of(bool paper_sign) {
  return paper_sign ? semdist::ProjectionTrigger::paper_sign : semdist::ProjectionTrigger::on_conflict;
}

py::dict projection_dict(const semdist::ProjectionResult& r) {
  py::dict d;
  d["projected"] = r.projected;
  d["conflicted"] = r.conflicted;
  d["inner_before"] = r.inner_before;
  d["inner_after"] = r.inner_after;
  return d;
}

}  // namespace

PYBIND11_MODULE(_semdist, m) {
  m.doc() = "Semantic distance metrics for text-conditioned generation";

  static py::exception<semdist::Error> error(m, "Error", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const semdist::Error& e) {
      // args = (kind, message)
      py::tuple args = py::make_tuple(std::string(semdist::to_string(e.kind())), std::string(e.what()));
      PyErr_SetObject(error.ptr(), args.ptr());
    }
  });

  // ---- embeddings
  m.def(
      "read_emb",
      [](const std::filesystem::path& path) {
        const auto mat = semdist::read_emb(path);
        return py::make_tuple(to_array(mat), std::string(semdist::to_string(mat.role())));
      },
      py::arg("path"), "Load an EMB1 file. Returns (array[count, dim] float32, role).");
  m.def(
      "write_emb",
      [](const std::filesystem::path& path, const FloatArray& array, const std::string& role) {
        semdist::write_emb(to_matrix(array, parse_role(role)), path);
      },
      py::arg("path"), py::arg("array"), py::arg("role"));
  m.def(
      "normalize_rows",
      [](const FloatArray& array) {
        return to_array(semdist::normalize_rows(to_matrix(array, semdist::Role::text)));
      },
      py::arg("array"));

  py::class_<semdist::PairedDataset>(m, "Dataset")
      .def(py::init(&make_dataset), py::arg("text"), py::arg("real"), py::arg("fake"),
           py::arg("records") = std::nullopt,
           "Rows are paired by index unless records [(t, r, f, image_id, caption_id), ...] is given.")
      .def_static("from_manifest", &semdist::load_manifest, py::arg("path"))
      .def("save", [](const semdist::PairedDataset& ds, const std::filesystem::path& p) { semdist::save_dataset(ds, p); },
           py::arg("manifest_path"))
      .def("subsample", &semdist::subsample, py::arg("n"), py::arg("seed"))
      .def("__len__", &semdist::PairedDataset::size)
      .def_property_readonly("dim", [](const semdist::PairedDataset& ds) { return ds.text.dim(); })
      .def_property_readonly("text", [](const semdist::PairedDataset& ds) { return to_array(ds.text); })
      .def_property_readonly("real", [](const semdist::PairedDataset& ds) { return to_array(ds.real); })
      .def_property_readonly("fake", [](const semdist::PairedDataset& ds) { return to_array(ds.fake); })
      .def_property_readonly("records", [](const semdist::PairedDataset& ds) {
        py::list out;
        for (const auto& r : ds.records) out.append(py::make_tuple(r.text, r.real, r.fake, r.image_id, r.caption_id));
        return out;
      });

  // ---- metrics
  py::class_<semdist::MetricConfig>(m, "MetricConfig")
      .def(py::init([](double ridge_scale, double omega, double scale, const std::string& trsv_mode,
                       std::uint64_t seed, std::size_t distractors) {
             semdist::MetricConfig c;
             c.ridge_scale = ridge_scale;
             c.omega = omega;
             c.scale = scale;
             c.trsv_mode = semdist::parse_trsv_mode(trsv_mode);
             c.seed = seed;
             c.distractors = distractors;
             return c;
           }),
           py::arg("ridge_scale") = 1e-6, py::arg("omega") = 2.5, py::arg("scale") = 100.0,
           py::arg("trsv_mode") = "diag", py::arg("seed") = 0, py::arg("distractors") = 99)
      .def_readwrite("ridge_scale", &semdist::MetricConfig::ridge_scale)
      .def_readwrite("omega", &semdist::MetricConfig::omega)
      .def_readwrite("scale", &semdist::MetricConfig::scale)
      .def_readwrite("seed", &semdist::MetricConfig::seed)
      .def_readwrite("distractors", &semdist::MetricConfig::distractors)
      .def_property(
          "trsv_mode", [](const semdist::MetricConfig& c) { return std::string(semdist::to_string(c.trsv_mode)); },
          [](semdist::MetricConfig& c, const std::string& s) { c.trsv_mode = semdist::parse_trsv_mode(s); });

  m.def(
      "evaluate",
      [](const semdist::PairedDataset& ds, const std::string& metrics, const semdist::MetricConfig& config) {
        const auto report = semdist::evaluate(ds, semdist::parse_metric_selection(metrics), config);
        return to_python(report.to_json());
      },
      py::arg("dataset"), py::arg("metrics") = "ssd,cs,cfid,r", py::arg("config") = semdist::MetricConfig{},
      "Report dict with 'values' (scaled), 'raw', 'n_records' and 'config'.");
  m.def(
      "stability_sweep",
      [](const semdist::PairedDataset& ds, const std::vector<std::size_t>& counts, std::size_t repeats,
         std::uint64_t seed, const semdist::MetricConfig& config) {
        return to_python(semdist::stability_sweep(ds, counts, repeats, seed, config).to_json());
      },
      py::arg("dataset"), py::arg("counts"), py::arg("repeats"), py::arg("seed") = 0,
      py::arg("config") = semdist::MetricConfig{});
  m.def(
      "r_precision",
      [](const semdist::PairedDataset& ds, std::size_t distractors, std::uint64_t seed) {
        ds.validate();
        return semdist::r_precision(ds.fake, ds.text, ds.records, distractors, seed);
      },
      py::arg("dataset"), py::arg("distractors") = 99, py::arg("seed") = 0);

  m.def("ss_term", &semdist::ss_term, py::arg("mean_fake"), py::arg("mean_text"));
  m.def("dsv_term", &semdist::dsv_term, py::arg("cond_cov_fake"), py::arg("cond_cov_real"));
  m.def(
      "trsv_term",
      [](const semdist::Matrix& a, const semdist::Matrix& b, const std::string& mode) {
        return semdist::trsv_term(a, b, semdist::parse_trsv_mode(mode));
      },
      py::arg("cond_cov_fake"), py::arg("cond_cov_real"), py::arg("mode") = "diag");
  m.def("conditional_covariance", &semdist::conditional_covariance, py::arg("c_xx"), py::arg("c_xs"),
        py::arg("c_ss"), py::arg("ridge_scale") = 1e-6);
  m.def("matrix_sqrt_psd", &semdist::matrix_sqrt_psd, py::arg("a"));

  // ---- gradient projection
  m.def(
      "project",
      [](const Eigen::VectorXd& delta_a, const Eigen::VectorXd& delta_s, bool paper_sign, const std::string& solver) {
        const semdist::GradientPair pair{delta_a, delta_s};
        if (solver == "closed_form") return projection_dict(semdist::project(pair, trigger_of(paper_sign)));
        if (solver == "qp") return projection_dict(semdist::project_qp(pair, trigger_of(paper_sign)));
        throw semdist::Error(semdist::ErrorKind::invalid_argument, "solver must be 'closed_form' or 'qp'");
      },
      py::arg("delta_a"), py::arg("delta_s"), py::arg("paper_sign") = false, py::arg("solver") = "closed_form");
  m.def(
      "project_onto_constraints",
      [](const Eigen::VectorXd& g, const Eigen::MatrixXd& constraints, double tolerance) {
        const auto s = semdist::project_onto_constraints(g, constraints, tolerance);
        py::dict d;
        d["projected"] = s.projected;
        d["multipliers"] = s.multipliers;
        d["sweeps"] = s.sweeps;
        d["kkt_residual"] = s.kkt_residual;
        return d;
      },
      py::arg("gradient"), py::arg("constraints"), py::arg("tolerance") = 1e-12);

  // ---- hard negatives
  py::class_<semdist::PosLexicon>(m, "Lexicon")
      .def(py::init<>())
      .def("add", [](semdist::PosLexicon& l, const std::string& token,
                     const std::string& pos) { return l.add(token, semdist::parse_pos(pos)); },
           py::arg("token"), py::arg("pos"))
      .def("tag", [](const semdist::PosLexicon& l, const std::string& t) { return std::string(semdist::to_string(l.tag(t))); },
           py::arg("token"))
      .def("__len__", &semdist::PosLexicon::size);
  m.def(
      "load_lexicon", [](const std::filesystem::path& p) { return semdist::load_lexicon(p); }, py::arg("path"));
  m.def(
      "tokenize",
      [](const std::string& caption, const semdist::PosLexicon& lexicon) {
        const auto t = semdist::tokenize(caption, lexicon);
        std::vector<std::string> tags;
        for (auto p : t.tags) tags.emplace_back(semdist::to_string(p));
        py::dict d;
        d["tokens"] = t.tokens;
        d["tags"] = tags;
        d["replaceable"] = t.replaceable;
        return d;
      },
      py::arg("caption"), py::arg("lexicon"));
  m.def("replacement_count", &semdist::replacement_count, py::arg("ratio"), py::arg("n_replaceable"));
  m.def(
      "hard_negative",
      [](const std::string& caption, const semdist::PosLexicon& lexicon, double ratio, std::uint64_t seed) {
        const auto t = semdist::tokenize(caption, lexicon);
        const auto neg = semdist::construct_hard_negative(t, lexicon, ratio, seed);
        py::dict d;
        d["text"] = semdist::render_hard_negative(caption, t, neg);
        d["tokens"] = neg.tokens;
        d["replaced_indices"] = neg.replaced_indices;
        d["originals"] = neg.originals;
        d["replacements"] = neg.replacements;
        return d;
      },
      py::arg("caption"), py::arg("lexicon"), py::arg("ratio"), py::arg("seed") = 0,
      "Same corruption the CLI applies to caption line i when seed = mix_seed(cli_seed, i).");
  m.def("mix_seed", &semdist::mix_seed, py::arg("seed"), py::arg("stream"));
}

#include "mcd.h"

#include <cstring>
#include <exception>
#include <memory>
#include <new>
#include <string>

#include "mcd/denoiser.hpp"
#include "mcd/error.hpp"
#include "mcd/experiment.hpp"
#include "mcd/metrics.hpp"
#include "mcd/store.hpp"

struct mcd_experiment {
  mcd::experiment::Experiment exp;
};

struct mcd_array {
  mcd::store::ArrayContainer container;
  mcd::Array data;
};

struct mcd_model {
  mcd::Model model;
};

namespace {

thread_local std::string g_error;
thread_local std::string g_missing_stage;

mcd_status fail(mcd_status s, const std::string& msg) {
  g_error = msg;
  return s;
}

template <class F>
mcd_status guarded(F&& f) {
  g_error.clear();
  g_missing_stage.clear();
  try {
    return f();
  } catch (const mcd::MissingDependencyError& e) {
    g_missing_stage = e.stage();
    return fail(MCD_ERR_MISSING_DEPENDENCY, e.what());
  } catch (const mcd::ConfigError& e) {
    return fail(MCD_ERR_CONFIG, e.what());
  } catch (const mcd::IoError& e) {
    return fail(MCD_ERR_IO, e.what());
  } catch (const mcd::DataError& e) {
    return fail(MCD_ERR_DATA, e.what());
  } catch (const mcd::InvariantError& e) {
    return fail(MCD_ERR_INVARIANT, e.what());
  } catch (const mcd::TrainingError& e) {
    return fail(MCD_ERR_TRAINING, e.what());
  } catch (const std::bad_alloc&) {
    return fail(MCD_ERR_INTERNAL, "out of memory");
  } catch (const std::filesystem::filesystem_error& e) {
    return fail(MCD_ERR_IO, e.what());
  } catch (const std::exception& e) {
    return fail(MCD_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(MCD_ERR_INTERNAL, "unknown error");
  }
}

mcd_status copy_text(const std::string& s, char* buf, size_t cap, size_t* needed) {
  if (needed) *needed = s.size() + 1;
  if (!buf && cap == 0) return MCD_OK;
  if (!buf) return fail(MCD_ERR_INVALID_ARGUMENT, "null buffer with nonzero capacity");
  if (cap < s.size() + 1) return fail(MCD_ERR_BUFFER_TOO_SMALL, "buffer too small");
  std::memcpy(buf, s.c_str(), s.size() + 1);
  return MCD_OK;
}

}  // namespace

extern "C" {

const char* mcd_version(void) { return "1.0.0"; }

const char* mcd_status_string(mcd_status s) {
  switch (s) {
    case MCD_OK: return "ok";
    case MCD_ERR_INVALID_ARGUMENT: return "invalid argument";
    case MCD_ERR_CONFIG: return "configuration error";
    case MCD_ERR_MISSING_DEPENDENCY: return "missing dependency";
    case MCD_ERR_IO: return "i/o error";
    case MCD_ERR_DATA: return "data error";
    case MCD_ERR_INVARIANT: return "invariant violated";
    case MCD_ERR_TRAINING: return "training failure";
    case MCD_ERR_BUFFER_TOO_SMALL: return "buffer too small";
    case MCD_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* mcd_last_error(void) { return g_error.c_str(); }
const char* mcd_last_missing_stage(void) { return g_missing_stage.c_str(); }

mcd_status mcd_experiment_open(const char* config_path, const char* workdir, const char* const* overrides,
                               size_t n_overrides, mcd_experiment** out) {
  return guarded([&] {
    if (!config_path || !workdir || !out || (n_overrides && !overrides))
      return fail(MCD_ERR_INVALID_ARGUMENT, "mcd_experiment_open: null argument");
    *out = nullptr;
    std::vector<std::string> ov;
    for (size_t i = 0; i < n_overrides; ++i) {
      if (!overrides[i]) return fail(MCD_ERR_INVALID_ARGUMENT, "mcd_experiment_open: null override");
      ov.emplace_back(overrides[i]);
    }
    *out = new mcd_experiment{mcd::experiment::Experiment::open(config_path, workdir, ov)};
    return MCD_OK;
  });
}

void mcd_experiment_free(mcd_experiment* exp) { delete exp; }

mcd_status mcd_experiment_run(mcd_experiment* exp, const char* stage) {
  return guarded([&] {
    if (!exp || !stage) return fail(MCD_ERR_INVALID_ARGUMENT, "mcd_experiment_run: null argument");
    if (std::string(stage) == "all")
      exp->exp.run_all();
    else
      exp->exp.run(mcd::experiment::parse_stage(stage));
    return MCD_OK;
  });
}

mcd_status mcd_experiment_config_hash(const mcd_experiment* exp, char* buf, size_t cap, size_t* needed) {
  return guarded([&] {
    if (!exp) return fail(MCD_ERR_INVALID_ARGUMENT, "null experiment");
    return copy_text(exp->exp.hash(), buf, cap, needed);
  });
}

mcd_status mcd_experiment_pipeline(const mcd_experiment* exp, char* buf, size_t cap, size_t* needed) {
  return guarded([&] {
    if (!exp) return fail(MCD_ERR_INVALID_ARGUMENT, "null experiment");
    std::string s;
    for (auto st : exp->exp.pipeline()) s += (s.empty() ? "" : " ") + mcd::experiment::to_string(st);
    return copy_text(s, buf, cap, needed);
  });
}

mcd_status mcd_experiment_effective_config(const mcd_experiment* exp, char* buf, size_t cap, size_t* needed) {
  return guarded([&] {
    if (!exp) return fail(MCD_ERR_INVALID_ARGUMENT, "null experiment");
    return copy_text(exp->exp.effective_json().dump(2), buf, cap, needed);
  });
}

mcd_status mcd_experiment_results(const mcd_experiment* exp, char* buf, size_t cap, size_t* needed) {
  return guarded([&] {
    if (!exp) return fail(MCD_ERR_INVALID_ARGUMENT, "null experiment");
    std::string s;
    for (const auto& [k, v] : exp->exp.results()) s += k + "=" + v + "\n";
    return copy_text(s, buf, cap, needed);
  });
}

mcd_status mcd_experiment_results_path(const mcd_experiment* exp, char* buf, size_t cap, size_t* needed) {
  return guarded([&] {
    if (!exp) return fail(MCD_ERR_INVALID_ARGUMENT, "null experiment");
    return copy_text(exp->exp.results_path().string(), buf, cap, needed);
  });
}

mcd_status mcd_array_read(const char* stem, mcd_array** out) {
  return guarded([&] {
    if (!stem || !out) return fail(MCD_ERR_INVALID_ARGUMENT, "mcd_array_read: null argument");
    *out = nullptr;
    auto c = mcd::store::read(stem);
    auto d = mcd::store::to_double(c);
    *out = new mcd_array{std::move(c), std::move(d)};
    return MCD_OK;
  });
}

mcd_status mcd_array_create(const size_t* shape, size_t rank, const char* const* axes, const char* units,
                            mcd_array** out) {
  return guarded([&] {
    if (!out || (rank && (!shape || !axes))) return fail(MCD_ERR_INVALID_ARGUMENT, "mcd_array_create: null argument");
    *out = nullptr;
    mcd::Shape sh(shape, shape + rank);
    mcd::store::Metadata meta;
    for (size_t i = 0; i < rank; ++i) {
      if (!axes[i]) return fail(MCD_ERR_INVALID_ARGUMENT, "mcd_array_create: null axis name");
      if (!mcd::store::is_known_axis(axes[i]))
        return fail(MCD_ERR_INVALID_ARGUMENT, std::string("mcd_array_create: unknown axis '") + axes[i] + "'");
      meta.axes.emplace_back(axes[i]);
    }
    meta.units = units ? units : "";
    mcd::Array data(sh, 0.0);
    auto c = mcd::store::from_array(data, meta);
    *out = new mcd_array{std::move(c), std::move(data)};
    return MCD_OK;
  });
}

mcd_status mcd_array_write(const mcd_array* a, const char* stem) {
  return guarded([&] {
    if (!a || !stem) return fail(MCD_ERR_INVALID_ARGUMENT, "mcd_array_write: null argument");
    mcd::store::write(a->container, stem);
    return MCD_OK;
  });
}

void mcd_array_free(mcd_array* a) { delete a; }
size_t mcd_array_rank(const mcd_array* a) { return a ? a->data.rank() : 0; }
size_t mcd_array_size(const mcd_array* a) { return a ? a->data.size() : 0; }

mcd_status mcd_array_shape(const mcd_array* a, size_t* shape, size_t cap) {
  return guarded([&] {
    if (!a || !shape) return fail(MCD_ERR_INVALID_ARGUMENT, "mcd_array_shape: null argument");
    if (cap < a->data.rank()) return fail(MCD_ERR_BUFFER_TOO_SMALL, "shape buffer shorter than rank");
    std::copy(a->data.shape().begin(), a->data.shape().end(), shape);
    return MCD_OK;
  });
}

mcd_status mcd_array_get(const mcd_array* a, double* out, size_t n) {
  return guarded([&] {
    if (!a || !out) return fail(MCD_ERR_INVALID_ARGUMENT, "mcd_array_get: null argument");
    if (n != a->data.size()) return fail(MCD_ERR_INVALID_ARGUMENT, "mcd_array_get: length mismatch");
    std::copy(a->data.values().begin(), a->data.values().end(), out);
    return MCD_OK;
  });
}

mcd_status mcd_array_set(mcd_array* a, const double* in, size_t n) {
  return guarded([&] {
    if (!a || !in) return fail(MCD_ERR_INVALID_ARGUMENT, "mcd_array_set: null argument");
    if (n != a->data.size()) return fail(MCD_ERR_INVALID_ARGUMENT, "mcd_array_set: length mismatch");
    if (a->container.type != mcd::store::ScalarType::float32)
      return fail(MCD_ERR_INVALID_ARGUMENT, "mcd_array_set: only float32 containers are writable");
    std::copy(in, in + n, a->data.data());
    a->container = mcd::store::from_array(a->data, a->container.meta);
    return MCD_OK;
  });
}

mcd_status mcd_array_content_hash(const mcd_array* a, char* buf, size_t cap, size_t* needed) {
  return guarded([&] {
    if (!a) return fail(MCD_ERR_INVALID_ARGUMENT, "null array");
    return copy_text(a->container.content_hash(), buf, cap, needed);
  });
}

mcd_status mcd_model_load(const char* path, mcd_model** out) {
  return guarded([&] {
    if (!path || !out) return fail(MCD_ERR_INVALID_ARGUMENT, "mcd_model_load: null argument");
    *out = nullptr;
    *out = new mcd_model{mcd::Model::load(path)};
    return MCD_OK;
  });
}

void mcd_model_free(mcd_model* m) { delete m; }
int mcd_model_in_channels(const mcd_model* m) { return m ? m->model.config().in_channels : 0; }

mcd_status mcd_model_predict(const mcd_model* m, const double* inputs, size_t rows, size_t cols, double* out) {
  return guarded([&] {
    if (!m || !inputs || !out) return fail(MCD_ERR_INVALID_ARGUMENT, "mcd_model_predict: null argument");
    if (!rows || !cols) return fail(MCD_ERR_INVALID_ARGUMENT, "mcd_model_predict: empty image");
    std::vector<mcd::Image> in;
    const size_t P = rows * cols;
    for (int k = 0; k < m->model.config().in_channels; ++k)
      in.emplace_back(mcd::Shape{rows, cols}, std::vector<double>(inputs + k * P, inputs + (k + 1) * P));
    const auto y = m->model.predict(in);
    std::copy(y.values().begin(), y.values().end(), out);
    return MCD_OK;
  });
}

mcd_status mcd_auprc(const double* scores, const uint8_t* positive, size_t n, double* out, int* defined) {
  return guarded([&] {
    if ((n && (!scores || !positive)) || !out || !defined)
      return fail(MCD_ERR_INVALID_ARGUMENT, "mcd_auprc: null argument");
    const auto v = mcd::metrics::auprc({scores, n}, {positive, n});
    *defined = v ? 1 : 0;
    *out = v ? *v : 0.0;
    return MCD_OK;
  });
}

mcd_status mcd_psnr(const double* image, const double* reference, size_t rows, size_t cols, double data_range,
                    double* out) {
  return guarded([&] {
    if (!image || !reference || !out) return fail(MCD_ERR_INVALID_ARGUMENT, "mcd_psnr: null argument");
    const mcd::Image a({rows, cols}, std::vector<double>(image, image + rows * cols));
    const mcd::Image b({rows, cols}, std::vector<double>(reference, reference + rows * cols));
    *out = mcd::metrics::psnr(a, b, data_range);
    return MCD_OK;
  });
}

mcd_status mcd_ssim(const double* image, const double* reference, size_t rows, size_t cols, double data_range,
                    double* out) {
  return guarded([&] {
    if (!image || !reference || !out) return fail(MCD_ERR_INVALID_ARGUMENT, "mcd_ssim: null argument");
    const mcd::Image a({rows, cols}, std::vector<double>(image, image + rows * cols));
    const mcd::Image b({rows, cols}, std::vector<double>(reference, reference + rows * cols));
    *out = mcd::metrics::ssim(a, b, data_range);
    return MCD_OK;
  });
}

}  // extern "C"

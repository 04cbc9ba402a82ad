#include "mixlen/train.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>

#include "mixlen/errors.hpp"
#include "mixlen/util.hpp"

namespace mixlen {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

Json tensor_to_json(const Tensor& t) {
  if (t.rank() == 0) return t.item();
  if (t.rank() == 1) return t.storage();
  Json rows = Json::array();
  for (std::size_t r = 0; r < t.rows(); ++r) {
    Json row = Json::array();
    for (std::size_t c = 0; c < t.cols(); ++c) row.push_back(t.at(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Tensor tensor_from_json(const Json& values, const Tensor::Shape& shape, const std::string& name) {
  std::vector<double> flat;
  auto fail = [&]() -> LoadError {
    return LoadError("parameter " + name + " does not match shape " + shape_string(shape));
  };
  if (shape.size() == 2) {
    if (!values.is_array() || values.size() != shape[0]) throw fail();
    for (const auto& row : values) {
      if (!row.is_array() || row.size() != shape[1]) throw fail();
      for (const auto& v : row) flat.push_back(v.get<double>());
    }
  } else if (shape.size() == 1) {
    if (!values.is_array() || values.size() != shape[0]) throw fail();
    for (const auto& v : values) flat.push_back(v.get<double>());
  } else {
    flat.push_back(values.get<double>());
  }
  return Tensor(shape, std::move(flat));
}

Json nullable(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }
double from_nullable(const Json& j) { return j.is_null() ? kNaN : j.get<double>(); }

Json record_to_json(const EpochRecord& r) {
  return Json{{"epoch", r.epoch},
              {"data", nullable(r.data)},
              {"difference", nullable(r.difference)},
              {"correlation", nullable(r.correlation)},
              {"total", nullable(r.total)},
              {"val_total", nullable(r.val_total)}};
}

EpochRecord record_from_json(const Json& j) {
  return EpochRecord{j.at("epoch").get<std::size_t>(), from_nullable(j.at("data")),
                     from_nullable(j.at("difference")), from_nullable(j.at("correlation")),
                     from_nullable(j.at("total")), from_nullable(j.at("val_total"))};
}

}  // namespace

Json checkpoint_to_json(const Checkpoint& ckpt) {
  Json params = Json::array();
  for (const Parameter* p : ckpt.model.parameters()) {
    if (!p->value.all_finite()) throw ContractError("parameter " + p->name + " is not finite");
    params.push_back(
        Json{{"name", p->name}, {"shape", p->value.shape()}, {"values", tensor_to_json(p->value)}});
  }
  Json training{{"epochs_run", ckpt.training.epochs_run},
                {"final_epoch", ckpt.training.final_epoch
                                    ? record_to_json(*ckpt.training.final_epoch)
                                    : Json(nullptr)}};
  return Json{{"format", kCheckpointFormat},
              {"version", kCheckpointVersion},
              {"provenance", ckpt.provenance},
              {"config", ckpt.model.config().to_json()},
              {"loss_weights",
               Json{{"lambda_dc", ckpt.loss.lambda_dc}, {"lambda_cor", ckpt.loss.lambda_cor}}},
              {"manifest", ckpt.model.manifest().to_json()},
              {"norm_stats", ckpt.model.norm().to_json()},
              {"parameters", std::move(params)},
              {"training", std::move(training)}};
}

Checkpoint checkpoint_from_json(const Json& doc) {
  try {
    if (!doc.is_object() || doc.value("format", "") != kCheckpointFormat) {
      throw LoadError("not a mixlen checkpoint");
    }
    const int version = doc.at("version").get<int>();
    if (version != kCheckpointVersion) {
      throw LoadError("checkpoint version " + std::to_string(version) + " is not supported (want " +
                      std::to_string(kCheckpointVersion) + ")");
    }
    Model model(ModelConfig::from_json(doc.at("config")),
                ModalityManifest::from_json(doc.at("manifest")),
                NormStats::from_json(doc.at("norm_stats")));

    const Json& arrays = doc.at("parameters");
    auto expected = model.parameters();
    if (!arrays.is_array() || arrays.size() != expected.size()) {
      throw LoadError("checkpoint holds " + std::to_string(arrays.size()) +
                      " parameter arrays, config implies " + std::to_string(expected.size()));
    }
    for (std::size_t k = 0; k < expected.size(); ++k) {
      Parameter& p = *expected[k];
      const Json& entry = arrays[k];
      const std::string name = entry.at("name").get<std::string>();
      if (name != p.name) {
        throw LoadError("parameter " + name + " found where " + p.name + " was expected");
      }
      const auto shape = entry.at("shape").get<Tensor::Shape>();
      if (shape != p.value.shape()) {
        throw LoadError("parameter " + name + " has shape " + shape_string(shape) +
                        ", config implies " + p.value.shape_string());
      }
      p.value = tensor_from_json(entry.at("values"), shape, name);
    }

    Checkpoint ckpt{std::move(model), {}, {}, doc.value("provenance", Json::object())};
    ckpt.loss.lambda_dc = doc.at("loss_weights").at("lambda_dc").get<double>();
    ckpt.loss.lambda_cor = doc.at("loss_weights").at("lambda_cor").get<double>();
    const Json& training = doc.at("training");
    ckpt.training.epochs_run = training.at("epochs_run").get<std::size_t>();
    if (!training.at("final_epoch").is_null()) {
      ckpt.training.final_epoch = record_from_json(training.at("final_epoch"));
    }
    return ckpt;
  } catch (const Json::exception& e) {
    throw LoadError(std::string("malformed checkpoint: ") + e.what());
  } catch (const LoadError&) {
    throw;
  } catch (const Error& e) {
    throw LoadError(std::string("invalid checkpoint: ") + e.what());
  }
}

Checkpoint parse_checkpoint(std::string_view text) {
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const Json::exception& e) {
    throw LoadError(std::string("unreadable checkpoint: ") + e.what());
  }
  return checkpoint_from_json(doc);
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << checkpoint_to_json(ckpt).dump(1) << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_checkpoint(buffer.str());
}

Model make_model(const ModelConfig& config, const Dataset& ds, const SplitPlan& split) {
  return Model(config, ds.manifest, fit_norm_stats(ds, split.train));
}

TrainResult train(Model model, const Dataset& ds, const SplitPlan& split,
                  const TrainConfig& config) {
  config.loss.validate();
  if (split.train.size() < 2) throw ContractError("training split needs at least 2 rows");
  const bool austin = model.config().trunk.use_mechanism_node;
  const Batch train_batch = make_batch(ds, split.train, model.norm(), austin);
  const bool validate = split.validation.size() >= 2;
  const Batch val_batch =
      validate ? make_batch(ds, split.validation, model.norm(), austin) : Batch{};

  auto params = model.parameters();
  AdamState adam = make_adam_state(params, config.adam);
  Rng dropout_rng(derive_seed(config.seed, 1));

  LossHistory history;
  history.reserve(config.epochs);
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    EpochRecord rec;
    rec.epoch = epoch;
    rec.val_total = kNaN;
    if (validate) {
      Tape vt;
      try {
        const NodeId pred = model.forward(vt, val_batch.input, Mode::Eval);
        const auto loss = coupling_loss(vt, pred, val_batch.target, val_batch.gap,
                                        vt.parameter(model.correlation_weight()),
                                        vt.parameter(model.correlation_bias()), config.loss);
        rec.val_total = vt.value(loss.total).item();
      } catch (const ContractError& e) {
        throw TrainingError(std::string("validation loss diverged: ") + e.what(),
                            static_cast<long>(epoch));
      }
    }

    Tape tape;
    const NodeId pred = model.forward(tape, train_batch.input, Mode::Train, &dropout_rng);
    if (!tape.value(pred).all_finite()) {
      throw TrainingError("non-finite prediction", static_cast<long>(epoch));
    }
    CouplingLoss loss;
    try {
      loss = coupling_loss(tape, pred, train_batch.target, train_batch.gap,
                           tape.parameter(model.correlation_weight()),
                           tape.parameter(model.correlation_bias()), config.loss);
    } catch (const ContractError& e) {
      throw TrainingError(std::string("loss diverged: ") + e.what(), static_cast<long>(epoch));
    }
    rec.data = tape.value(loss.data).item();
    rec.difference = tape.value(loss.difference).item();
    rec.correlation = tape.value(loss.correlation).item();
    rec.total = tape.value(loss.total).item();
    if (!std::isfinite(rec.total)) {
      throw TrainingError("non-finite training loss", static_cast<long>(epoch));
    }
    history.push_back(rec);

    try {
      adam_step(params, tape.backward(loss.total), adam);
    } catch (const TrainingError& e) {
      throw TrainingError(e.what(), static_cast<long>(epoch));
    }
  }

  Checkpoint ckpt{std::move(model), config.loss, {}, Json::object()};
  ckpt.training.epochs_run = config.epochs;
  if (!history.empty()) ckpt.training.final_epoch = history.back();
  return TrainResult{std::move(ckpt), std::move(history)};
}

void write_history_csv(std::ostream& out, const LossHistory& history,
                       const std::vector<std::string>& comments) {
  for (const auto& c : comments) out << "# " << c << '\n';
  out << "epoch,L_data,L_DC,L_COR,total,val_total\n";
  for (const auto& r : history) {
    out << r.epoch << ',' << format_double(r.data) << ',' << format_double(r.difference) << ','
        << format_double(r.correlation) << ',' << format_double(r.total) << ','
        << format_double(r.val_total) << '\n';
  }
}

}  // namespace mixlen

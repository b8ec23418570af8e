// SPDX-License-Identifier: Apache-2.0
#include "m2g2/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "m2g2/csv.hpp"
#include "m2g2/errors.hpp"
#include "m2g2/optimizer.hpp"

namespace m2g2 {

EpisodeBatch WindowSet::batch(std::span<const std::size_t> subset) const {
  if (series == nullptr || gamma == nullptr) throw ContractError("window set is not bound");
  return make_batch(*series, *gamma, subset, history, horizon);
}

double mean_loss(const Forecaster& model, ParamStore& params, const WindowSet& windows,
                 std::size_t batch_size) {
  if (windows.starts.empty()) throw DataError("no episodes to evaluate");
  if (batch_size == 0) throw InvalidParameter("batch size must be positive");
  double total = 0.0;
  for (std::size_t i = 0; i < windows.starts.size(); i += batch_size) {
    const std::size_t n = std::min(batch_size, windows.starts.size() - i);
    const auto batch = windows.batch(std::span(windows.starts).subspan(i, n));
    Tape tape(GradMode::disabled);
    const auto out = model.forward(tape, params, batch);
    total += model.loss(tape, out, batch).value()(0, 0) * static_cast<double>(n);
  }
  return total / static_cast<double>(windows.starts.size());
}

TrainResult train(const Forecaster& model, ParamStore params, const WindowSet& train_windows,
                  const WindowSet& val_windows, const TrainConfig& config, std::uint64_t seed,
                  const EpochCallback& on_epoch) {
  config.validate();
  if (train_windows.starts.empty()) throw DataError("training split yields no episodes");
  if (val_windows.starts.empty()) throw DataError("validation split yields no episodes");

  TrainResult result;
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> order = train_windows.starts;
  std::size_t bad_epochs = 0;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (std::size_t i = 0; i < order.size(); i += config.batch_size) {
      const std::size_t n = std::min(config.batch_size, order.size() - i);
      const auto batch = train_windows.batch(std::span(order).subspan(i, n));
      Tape tape;
      const auto out = model.forward(tape, params, batch);
      const Var loss = model.loss(tape, out, batch);
      const double value = loss.value()(0, 0);
      if (!std::isfinite(value)) {
        throw NonFiniteError("training diverged: loss is " + std::to_string(value) +
                             " at epoch " + std::to_string(epoch) + ", batch " +
                             std::to_string(i / config.batch_size + 1) +
                             "; lower train.lr or set train.clip_norm");
      }
      try {
        tape.backward(loss);
      } catch (const NonFiniteError& e) {
        throw NonFiniteError(std::string(e.what()) + " at epoch " + std::to_string(epoch) +
                             "; lower train.lr or set train.clip_norm");
      }
      adam_step(params, config.adam);
      total += value * static_cast<double>(n);
    }
    EpochRecord rec{epoch, total / static_cast<double>(order.size()),
                    mean_loss(model, params, val_windows, config.batch_size)};
    if (!std::isfinite(rec.val_loss)) {
      throw NonFiniteError("validation loss is not finite at epoch " + std::to_string(epoch));
    }
    result.log.push_back(rec);
    result.stopped_epoch = epoch;
    if (on_epoch) on_epoch(rec);
    if (result.best_epoch == 0 || rec.val_loss < result.best_val_loss) {
      result.best = params;
      result.best_epoch = epoch;
      result.best_val_loss = rec.val_loss;
      bad_epochs = 0;
    } else if (++bad_epochs >= config.patience) {
      break;
    }
  }
  return result;
}

std::string training_log_csv(const std::vector<EpochRecord>& log) {
  std::string out = "epoch,train_loss,val_loss\n";
  for (const auto& r : log) {
    out += std::to_string(r.epoch) + ',' + csv::format(r.train_loss) + ',' +
           csv::format(r.val_loss) + '\n';
  }
  return out;
}

void write_training_log(const std::filesystem::path& path, const std::vector<EpochRecord>& log) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
  out << training_log_csv(log);
}

}  // namespace m2g2

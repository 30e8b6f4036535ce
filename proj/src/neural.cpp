#include "pulsebench/neural.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <sstream>

#include "pulsebench/io_util.hpp"

namespace pb::nn {

namespace {

constexpr char kMagic[4] = {'P', 'B', 'W', 'T'};

// Fisher-Yates with explicit bounded draws so the permutation does not
// depend on a library's std::shuffle strategy.
void shuffle_indices(std::vector<std::size_t>& idx, std::uint64_t seed) {
  std::mt19937_64 g(seed);
  for (std::size_t i = idx.size(); i > 1; --i)
    std::swap(idx[i - 1], idx[g() % i]);
}

Tensor adapt_input(const ModelGraph& model, const WindowTensor& w,
                   std::size_t index) {
  Tensor x;
  if (model.input_shape.size() == 2)
    x = reshape_video_to_sequence(w.x);
  else
    x = w.x;
  require(shape_eq(x.shape, model.input_shape), ErrorKind::kShape,
          "window " + std::to_string(index) + ": input " + shape_str(x.shape) +
              " does not fit model input " + shape_str(model.input_shape));
  return x;
}

}  // namespace

TrainResult train(ModelGraph& model, const std::vector<WindowTensor>& windows,
                  const TrainConfig& cfg) {
  require(!windows.empty(), ErrorKind::kEmptyInput, "no training windows");
  require(cfg.epochs >= 1, ErrorKind::kConfig, "epochs must be >= 1");
  require(cfg.batch_size >= 1, ErrorKind::kConfig, "batch size must be >= 1");
  require(cfg.lr >= 0.0, ErrorKind::kConfig, "learning rate must be >= 0");
  require(cfg.loss == "mse" || cfg.loss == "pearson", ErrorKind::kConfig,
          "unknown loss: " + cfg.loss);

  std::vector<Tensor> inputs;
  inputs.reserve(windows.size());
  for (std::size_t i = 0; i < windows.size(); ++i)
    inputs.push_back(adapt_input(model, windows[i], i));

  model.init_params(cfg.seed);
  auto params = model.params();
  AdamT<float> opt(static_cast<float>(cfg.lr));

  auto loss_fn = (cfg.loss == "pearson") ? neg_pearson_loss<float>
                                         : mse_standardized_loss<float>;

  std::vector<std::size_t> order(windows.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  int pending = 0;
  auto flush = [&]() {
    if (pending == 0) return;
    const float inv = 1.0f / static_cast<float>(pending);
    for (auto& r : params) r.grad->vec() *= inv;
    opt.step(params);
    model.zero_grad();
    pending = 0;
  };

  TrainResult result;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle_indices(order, rng::derive_seed(cfg.seed, 0xE50Cull + epoch));
    double loss_sum = 0.0;
    for (std::size_t i : order) {
      Tensor pred = model.forward(inputs[i], /*train=*/true);
      auto lv = loss_fn(pred, windows[i].y);
      if (!std::isfinite(lv.value)) {
        std::ostringstream msg;
        msg << "non-finite loss " << lv.value << " at epoch " << epoch
            << ", window " << i;
        fail(ErrorKind::kNanLoss, msg.str());
      }
      loss_sum += lv.value;
      model.backward(lv.grad);
      if (++pending == cfg.batch_size) flush();
    }
    flush();
    result.epoch_loss.push_back(loss_sum / static_cast<double>(windows.size()));
  }
  return result;
}

void save_weights(ModelGraph& model, const std::string& path) {
  auto refs = model.params();
  for (auto& b : model.buffers()) refs.push_back(b);
  require(refs.size() <= std::numeric_limits<std::uint32_t>::max(),
          ErrorKind::kInvalidArgument, "too many tensors");

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  require(os.good(), ErrorKind::kIo, "cannot open for writing: " + path);
  io::write_magic(os, kMagic);
  io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(refs.size()));
  for (const auto& r : refs) {
    require(r.name.size() <= std::numeric_limits<std::uint16_t>::max(),
            ErrorKind::kInvalidArgument, "tensor name too long: " + r.name);
    io::write_le<std::uint16_t>(os, static_cast<std::uint16_t>(r.name.size()));
    os.write(r.name.data(), static_cast<std::streamsize>(r.name.size()));
    io::write_le<std::uint8_t>(os, static_cast<std::uint8_t>(r.value->rank()));
    for (auto d : r.value->shape)
      io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(d));
    io::write_le_span<float>(os, r.value->data);
  }
  os.flush();
  require(os.good(), ErrorKind::kIo, "write failed: " + path);
}

std::map<std::string, Tensor> load_weights(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  require(is.good(), ErrorKind::kIo, "cannot open: " + path);
  io::expect_magic(is, kMagic, "not a PBWT weight file: " + path);

  const auto count = io::read_le<std::uint32_t>(is);
  std::map<std::string, Tensor> out;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = io::read_le<std::uint16_t>(is);
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    require(is.good(), ErrorKind::kIo, "unexpected end of file");
    const auto rank = io::read_le<std::uint8_t>(is);
    require(rank >= 1 && rank <= 8, ErrorKind::kFormat,
            "implausible tensor rank for '" + name + "'");
    Shape shape(rank);
    std::int64_t numel = 1;
    for (auto& d : shape) {
      d = io::read_le<std::uint32_t>(is);
      require(d >= 1, ErrorKind::kFormat, "zero dim in tensor '" + name + "'");
      numel *= d;
    }
    require(numel <= (std::int64_t{1} << 30), ErrorKind::kFormat,
            "implausible tensor size for '" + name + "'");
    Tensor t(shape);
    io::read_le_span<float>(is, t.data);
    const bool fresh = out.emplace(std::move(name), std::move(t)).second;
    require(fresh, ErrorKind::kFormat, "duplicate tensor name in " + path);
  }
  return out;
}

void apply_weights(ModelGraph& model,
                   const std::map<std::string, Tensor>& weights) {
  auto refs = model.params();
  for (auto& b : model.buffers()) refs.push_back(b);
  std::size_t used = 0;
  for (auto& r : refs) {
    auto it = weights.find(r.name);
    require(it != weights.end(), ErrorKind::kFormat,
            "weights are missing tensor '" + r.name + "'");
    require(shape_eq(it->second.shape, r.value->shape), ErrorKind::kShape,
            "tensor '" + r.name + "' has shape " + shape_str(it->second.shape) +
                ", model expects " + shape_str(r.value->shape));
    r.value->data = it->second.data;
    ++used;
  }
  require(used == weights.size(), ErrorKind::kFormat,
          "weight map holds tensors unknown to model '" + model.name + "'");
}

}  // namespace pb::nn

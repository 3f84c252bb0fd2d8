// Copyright 2026 The rotquant Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// rotquant command-line tool. Exit status: 0 when every check passes, 1 when
// a check fails, 2 on usage or input errors.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <iterator>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "rotquant/rotquant.hpp"

namespace {

using rotquant::Exec;
using rotquant::VerifyReport;
using json = nlohmann::ordered_json;

struct Common {
  std::uint64_t master_seed = 1;
  std::size_t trials = 0;  // 0 selects each experiment's default
  std::vector<std::size_t> dims;
  std::string format = "json";
  unsigned threads = 1;
  std::string out;
  bool no_timestamp = false;
};

struct Input {
  std::string gen;
  std::size_t d = 0;
  std::string in;
  bool pad = false;
};

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw rotquant::ArgumentError("cannot open " + path);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw rotquant::ArgumentError("cannot write " + path);
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

void emit_text(const std::string& text, const std::string& out) {
  if (out.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream f(out);
  if (!f) throw rotquant::ArgumentError("cannot write " + out);
  f << text;
}

std::vector<double> load_input(const Input& in, std::uint64_t seed) {
  if (!in.in.empty()) {
    auto v = rotquant::deserialize_as<std::vector<double>>(read_file(in.in));
    if (in.pad && !rotquant::is_power_of_two(v.size())) v = rotquant::pad_to_power_of_two(std::move(v));
    return v;
  }
  if (in.gen.empty() || in.d == 0) throw rotquant::ArgumentError("give --in FILE or both --gen KIND and --d N");
  return rotquant::gen_adversarial(rotquant::parse_input_kind(in.gen), in.d, seed,
                                   in.pad ? rotquant::PadPolicy::pad : rotquant::PadPolicy::reject);
}

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--master-seed", c.master_seed, "Master seed for derived per-trial seeds");
  sub->add_option("--trials", c.trials, "Monte Carlo trials (0 = experiment default)");
  sub->add_option("--dims", c.dims, "Comma-separated dimensions")->delimiter(',');
  sub->add_option("--format", c.format, "Report format")->check(CLI::IsMember({"json", "csv"}));
  sub->add_option("--threads", c.threads, "Worker threads; results do not depend on it")->check(CLI::PositiveNumber);
  sub->add_option("--out", c.out, "Write the report here instead of stdout");
  sub->add_flag("--no-timestamp", c.no_timestamp, "Omit the timestamp from JSON reports");
}

void add_input(CLI::App* sub, Input& in) {
  sub->add_option("--gen", in.gen, "Generator: one_hot, two_spike, flat, grid_midpoints, dirichlet_random");
  sub->add_option("--d", in.d, "Dimension for --gen");
  sub->add_option("--in", in.in, "Vector file (kind 4)");
  sub->add_flag("--pad", in.pad, "Zero-pad non-power-of-two inputs instead of rejecting them");
}

int emit_report(const std::string& name, const std::vector<VerifyReport>& rows, const json& config, const Common& c) {
  if (c.format == "csv") {
    emit_text(rotquant::report_csv(rows), c.out);
  } else {
    const std::string ts = c.no_timestamp ? "" : rotquant::utc_timestamp();
    emit_text(rotquant::report_json(name, rows, config, ts).dump(2) + "\n", c.out);
  }
  return rotquant::all_pass(rows) ? 0 : 1;
}

json common_config(const Common& c) {
  json j;
  j["master_seed"] = c.master_seed;
  j["trials"] = c.trials;
  j["dims"] = c.dims;
  j["threads"] = c.threads;
  return j;
}

template <class T>
T or_default(T value, T fallback) {
  return value ? value : fallback;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Composed randomized Hadamard transforms for quantization, with a verification harness"};
  app.require_subcommand(1);

  Common common;
  Input input;
  std::uint64_t seed = 1;
  int layers = -1;
  std::string mode = "drive-biased";
  int bits = 2;
  double p = 0.01;
  std::uint64_t noise_seed = 0;
  std::string ref;
  bool inverse = false;
  std::optional<double> eta3;
  std::optional<double> eta_inf;
  std::vector<std::size_t> clients{1, 4, 16};
  std::vector<double> ps{0.1, 0.01};
  bool quick = false;

  auto* transform = app.add_subcommand("transform", "Apply (or invert) a seeded k-RHT to a vector");
  add_input(transform, input);
  transform->add_option("--layers", layers, "RHT layers 0..3 (default 2)");
  transform->add_option("--seed", seed, "Rotation seed");
  transform->add_flag("--inverse", inverse, "Apply the inverse rotation");
  transform->add_option("--out", common.out, "Write the result as a vector file");

  auto* encode = app.add_subcommand("encode", "Quantize a vector into a payload file");
  add_input(encode, input);
  encode->add_option("--mode", mode, "drive-biased, drive-unbiased or bsq")
      ->check(CLI::IsMember({"drive-biased", "drive-unbiased", "bsq"}));
  encode->add_option("--layers", layers, "RHT layers 0..3 (default 2)");
  encode->add_option("--seed", seed, "Rotation seed");
  encode->add_option("--bits", bits, "bsq: bits per in-range coordinate");
  encode->add_option("--p", p, "bsq: tail mass sent exactly");
  encode->add_option("--noise-seed", noise_seed, "bsq: stochastic rounding seed");
  encode->add_option("--out", common.out, "Payload file")->required();

  auto* decode = app.add_subcommand("decode", "Reconstruct a vector from a payload file");
  decode->add_option("--in", input.in, "Payload file")->required();
  decode->add_option("--ref", ref, "Original vector file; enables the realized vNMSE");
  decode->add_option("--out", common.out, "Write the reconstruction as a vector file");

  auto* check = app.add_subcommand("check", "One-pass flatness check and layer recommendation");
  add_input(check, input);
  check->add_option("--eta3", eta3, "rho3 threshold (default C3 / sqrt(d))");
  check->add_option("--eta-inf", eta_inf, "linf^2 threshold (default 2 ln(2d) / d)");

  auto* vs = app.add_subcommand("verify-scalar", "d_K and W1 of rotated coordinates against N(0,1)");
  add_common(vs, common);
  vs->add_option("--gen", input.gen, "Input generator (default two_spike)");
  vs->add_option("--layers", layers, "RHT layers (default 2)");

  auto* vd = app.add_subcommand("verify-drive", "DRIVE vNMSE, bias and variance");
  add_common(vd, common);
  vd->add_option("--gen", input.gen, "Input generator (default two_spike)");
  vd->add_option("--mode", mode, "biased or unbiased")->check(CLI::IsMember({"biased", "unbiased"}));
  vd->add_option("--layers", layers, "RHT layers (default 2)");

  auto* vb = app.add_subcommand("verify-bsq", "Outlier fraction and error transfer of bounded-support quantization");
  add_common(vb, common);
  vb->add_option("--gen", input.gen, "Input generator (default two_spike)");
  vb->add_option("--p", ps, "Tail masses")->delimiter(',');
  vb->add_option("--bits", bits, "Bits for the error-transfer check");

  auto* vv = app.add_subcommand("verify-vq", "Conditional covariance and codebook universality");
  add_common(vv, common);

  auto* dme = app.add_subcommand("dme", "Distributed mean estimation with N DRIVE clients");
  add_common(dme, common);
  dme->add_option("--gen", input.gen, "Input generator (default one_hot)");
  dme->add_option("--d", input.d, "Dimension (default 4096)");
  dme->add_option("--clients", clients, "Client counts")->delimiter(',');
  dme->add_option("--mode", mode, "biased or unbiased")->check(CLI::IsMember({"biased", "unbiased"}));

  auto* report = app.add_subcommand("report", "Run every experiment and emit one combined report");
  add_common(report, common);
  report->add_flag("--quick", quick, "Reduce trial counts for a fast smoke run");

  CLI11_PARSE(app, argc, argv);

  try {
    const Exec exec{common.threads};

    if (transform->parsed()) {
      auto x = load_input(input, seed);
      const rotquant::RotationSpec spec(rotquant::Dim(x.size()), layers < 0 ? 2 : layers, seed);
      const rotquant::Rotation rot(spec);
      if (inverse) {
        rot.invert(x);
      } else {
        rot.apply(x);
      }
      if (!common.out.empty()) write_file(common.out, rotquant::serialize(x));
      json j;
      j["d"] = x.size();
      j["layers"] = spec.layers;
      j["seed"] = spec.seed;
      j["inverse"] = inverse;
      j["norm"] = rotquant::norm2(x);
      j["rho3"] = rotquant::rho3(x);
      j["linf_sq"] = rotquant::linf_sq(x);
      std::cout << j.dump(2) << "\n";
      return 0;
    }

    if (encode->parsed()) {
      const auto x = load_input(input, seed);
      const rotquant::RotationSpec spec(rotquant::Dim(x.size()), layers < 0 ? 2 : layers, seed);
      json j;
      std::vector<std::uint8_t> bytes;
      if (mode == "bsq") {
        const auto payload = rotquant::bsq_encode(x, spec, rotquant::BsqConfig::make(bits, p), noise_seed);
        bytes = rotquant::serialize(payload);
        j["outliers"] = payload.outliers.size();
        j["sent_fraction"] = payload.sent_fraction();
      } else {
        const auto m = mode == "drive-biased" ? rotquant::DriveMode::biased : rotquant::DriveMode::unbiased;
        const auto payload = rotquant::drive_encode(x, spec, m);
        bytes = rotquant::serialize(payload);
        j["scale"] = payload.scale;
      }
      write_file(common.out, bytes);
      j["mode"] = mode;
      j["d"] = x.size();
      j["layers"] = spec.layers;
      j["bytes"] = bytes.size();
      std::cout << j.dump(2) << "\n";
      return 0;
    }

    if (decode->parsed()) {
      const auto obj = rotquant::deserialize(read_file(input.in));
      std::vector<double> xh;
      json j;
      if (const auto* dp = std::get_if<rotquant::DrivePayload>(&obj)) {
        xh = rotquant::drive_decode(*dp);
        j["kind"] = std::string("drive-") + rotquant::to_string(dp->mode);
      } else if (const auto* bp = std::get_if<rotquant::BsqPayload>(&obj)) {
        xh = rotquant::bsq_decode(*bp);
        j["kind"] = "bsq";
      } else {
        throw rotquant::ArgumentError("decode expects a DRIVE or BSQ payload");
      }
      if (!common.out.empty()) write_file(common.out, rotquant::serialize(xh));
      j["d"] = xh.size();
      j["norm"] = rotquant::norm2(xh);
      if (!ref.empty()) {
        const auto x = rotquant::deserialize_as<std::vector<double>>(read_file(ref));
        if (x.size() != xh.size()) throw rotquant::DimensionError("reference length does not match payload");
        double err = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) err += (x[i] - xh[i]) * (x[i] - xh[i]);
        const double n = rotquant::norm2(x);
        j["vnmse"] = err / (n * n);
      }
      std::cout << j.dump(2) << "\n";
      return 0;
    }

    if (check->parsed()) {
      const auto x = load_input(input, seed);
      const auto dec = rotquant::decide_layers(x, eta3, eta_inf);
      json j;
      j["d"] = x.size();
      j["rho3"] = dec.rho3;
      j["linf_sq"] = dec.linf_sq;
      j["eta3"] = dec.eta3;
      j["eta_inf"] = dec.eta_inf;
      j["scalar_layers"] = dec.scalar_layers;
      j["vq_layers"] = dec.vq_layers;
      if (dec.scalar_layers == 1) {
        j["implied_dk_bound"] = dec.dk_bound();
        j["implied_w1_bound"] = dec.w1_bound();
      }
      if (dec.vq_layers == 2) j["implied_rms_cov_bound"] = dec.rms_cov_bound();
      std::cout << j.dump(2) << "\n";
      return 0;
    }

    json config = common_config(common);

    if (vs->parsed()) {
      rotquant::ScalarExperiment e;
      if (!input.gen.empty()) e.input = rotquant::parse_input_kind(input.gen);
      if (!common.dims.empty()) e.dims = common.dims;
      e.rotations = common.trials;
      e.master_seed = common.master_seed;
      e.layers = layers < 0 ? 2 : layers;
      e.exec = exec;
      config["input"] = rotquant::to_string(e.input);
      config["layers"] = e.layers;
      return emit_report("verify-scalar", rotquant::run_verify_scalar(e), config, common);
    }

    if (vd->parsed()) {
      rotquant::DriveExperiment e;
      if (!input.gen.empty()) e.input = rotquant::parse_input_kind(input.gen);
      if (!common.dims.empty()) e.dims = common.dims;
      e.trials = or_default<std::size_t>(common.trials, 10000);
      e.master_seed = common.master_seed;
      e.mode = mode == "unbiased" ? rotquant::DriveMode::unbiased : rotquant::DriveMode::biased;
      e.layers = layers < 0 ? 2 : layers;
      e.exec = exec;
      config["input"] = rotquant::to_string(e.input);
      config["mode"] = rotquant::to_string(e.mode);
      return emit_report("verify-drive", rotquant::run_verify_drive(e), config, common);
    }

    if (vb->parsed()) {
      rotquant::BsqExperiment e;
      if (!input.gen.empty()) e.input = rotquant::parse_input_kind(input.gen);
      if (!common.dims.empty()) e.dims = common.dims;
      e.ps = ps;
      e.bits = bits;
      e.tv_rotations = or_default<std::size_t>(common.trials, 1000);
      e.master_seed = common.master_seed;
      e.exec = exec;
      config["input"] = rotquant::to_string(e.input);
      config["bits"] = e.bits;
      config["p"] = e.ps;
      return emit_report("verify-bsq", rotquant::run_verify_bsq(e), config, common);
    }

    if (vv->parsed()) {
      std::vector<VerifyReport> rows = rotquant::run_bottleneck({4, 8, 16, 32, 64, 128, 256}, 100, common.master_seed);
      rotquant::DecorrelationExperiment dc;
      if (!common.dims.empty()) dc.dims = common.dims;
      dc.master_seed = common.master_seed;
      dc.exec = exec;
      for (auto& r : rotquant::run_decorrelation(dc)) rows.push_back(std::move(r));
      rotquant::VqExperiment e;
      if (!common.dims.empty()) e.dims = common.dims;
      e.trials = or_default<std::size_t>(common.trials, 10000);
      e.master_seed = common.master_seed;
      e.exec = exec;
      for (auto& r : rotquant::run_verify_vq(e)) rows.push_back(std::move(r));
      config["k_blk"] = e.k_blk;
      config["m"] = e.m;
      config["train_seed"] = e.train_seed;
      return emit_report("verify-vq", rows, config, common);
    }

    if (dme->parsed()) {
      rotquant::DmeExperiment e;
      if (!input.gen.empty()) e.input = rotquant::parse_input_kind(input.gen);
      if (input.d) e.d = input.d;
      e.clients = clients;
      e.trials = or_default<std::size_t>(common.trials, 1000);
      e.master_seed = common.master_seed;
      e.mode = mode == "biased" ? rotquant::DriveMode::biased : rotquant::DriveMode::unbiased;
      e.exec = exec;
      config["input"] = rotquant::to_string(e.input);
      config["d"] = e.d;
      config["clients"] = e.clients;
      return emit_report("dme", rotquant::run_dme(e), config, common);
    }

    if (report->parsed()) {
      const std::size_t scale = quick ? 10 : 1;
      std::vector<VerifyReport> rows;
      const auto append = [&rows](std::vector<VerifyReport> more) {
        for (auto& r : more) rows.push_back(std::move(r));
      };
      rotquant::ScalarExperiment sc;
      sc.draws /= scale;
      sc.master_seed = common.master_seed;
      sc.exec = exec;
      append(rotquant::run_verify_scalar(sc));
      for (auto kind : {rotquant::InputKind::two_spike, rotquant::InputKind::one_hot}) {
        rotquant::DriveExperiment dr;
        dr.input = kind;
        dr.trials /= scale;
        dr.master_seed = common.master_seed;
        dr.exec = exec;
        append(rotquant::run_verify_drive(dr));
      }
      rotquant::DriveExperiment ub;
      ub.input = rotquant::InputKind::one_hot;
      ub.mode = rotquant::DriveMode::unbiased;
      ub.dims = {64, 256, 1024, 4096};
      ub.trials /= scale;
      ub.master_seed = common.master_seed;
      ub.exec = exec;
      append(rotquant::run_verify_drive(ub));
      rotquant::DmeExperiment dm;
      dm.trials /= scale;
      dm.master_seed = common.master_seed;
      dm.exec = exec;
      append(rotquant::run_dme(dm));
      rotquant::BsqExperiment bq;
      bq.draws /= scale;
      bq.master_seed = common.master_seed;
      bq.exec = exec;
      append(rotquant::run_verify_bsq(bq));
      append(rotquant::run_bottleneck({4, 8, 16, 32, 64, 128, 256}, 100, common.master_seed));
      rotquant::DecorrelationExperiment dc;
      dc.master_seed = common.master_seed;
      dc.exec = exec;
      append(rotquant::run_decorrelation(dc));
      rotquant::VqExperiment vq;
      vq.trials /= scale;
      vq.master_seed = common.master_seed;
      vq.exec = exec;
      append(rotquant::run_verify_vq(vq));
      rotquant::AdaptiveExperiment ad;
      ad.soundness_inputs /= scale;
      ad.master_seed = common.master_seed;
      ad.exec = exec;
      append(rotquant::run_adaptive(ad));
      append(rotquant::run_cd_expansion());
      config["quick"] = quick;
      return emit_report("report", rows, config, common);
    }
  } catch (const rotquant::FormatError& e) {
    std::cerr << "format error [" << e.field() << "]: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}

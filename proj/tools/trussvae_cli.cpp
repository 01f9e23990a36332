// Command-line front end: dataset generation, homogenization, training,
// latent-space exploration and inverse design.
//
// Exit codes: 0 ok, 1 usage or configuration error, 2 data error, 3 numeric failure.

#include <chrono>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "trussvae/datagen.hpp"
#include "trussvae/genmodel.hpp"
#include "trussvae/homogenize.hpp"
#include "trussvae/inverse_design.hpp"
#include "trussvae/io/checkpoint.hpp"
#include "trussvae/io/config.hpp"
#include "trussvae/io/csv.hpp"
#include "trussvae/io/dataset_file.hpp"
#include "trussvae/io/report.hpp"
#include "trussvae/labeling.hpp"
#include "trussvae/latent_ops.hpp"

namespace {

using namespace trussvae;
namespace fs = std::filesystem;

struct Globals {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  unsigned threads = 0;
};

io::RunConfig load(const Globals& g) {
  io::RunConfig c = g.config_path.empty() ? io::RunConfig{} : io::load_config(g.config_path);
  if (g.seed) {
    c.datagen.rng_seed = *g.seed;
    c.train.seed = *g.seed;
    c.optimize.seed = *g.seed;
  }
  c.optimize.rho = c.rho;
  c.optimize.material = c.material;
  c.check();
  return c;
}

std::uint64_t report_seed(const Globals& g, const io::RunConfig& c) { return g.seed.value_or(c.train.seed); }

void write_json(const std::string& path, const nlohmann::json& j) {
  if (path.empty() || path == "-") {
    std::cout << j.dump(2) << '\n';
    return;
  }
  auto f = io::open_out(path);
  f << j.dump(2) << '\n';
}

std::vector<DatasetRecord> labeled_records(const std::string& path, PropertyKind expect) {
  io::DatasetFile d = io::read_dataset(path);
  if (!d.header.labeled) throw ConfigError("'" + path + "' has no property labels; run `homogenize` first");
  if (d.header.kind != expect)
    throw ConfigError("'" + path + "' holds " + std::string(to_string(d.header.kind)) + " labels, not " +
                      std::string(to_string(expect)));
  return std::move(d.records);
}

PropertyKind dataset_kind(const std::string& path) { return io::DatasetReader(path).header().kind; }

void export_family(const std::string& dir, const std::vector<LatentSample>& samples, double rho) {
  if (dir.empty()) return;
  fs::create_directories(dir);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (!samples[i].valid()) continue;
    char name[32];
    std::snprintf(name, sizeof name, "step_%04zu.obj", i);
    io::export_geometry(sized_cell(*samples[i].repaired, rho), io::GeometryFormat::obj_wireframe,
                        (fs::path(dir) / name).string());
  }
}

std::vector<std::optional<StiffnessRecord>> fe_family(const std::vector<LatentSample>& samples, const io::RunConfig& c,
                                                      unsigned threads) {
  std::vector<std::optional<StiffnessRecord>> out(samples.size());
  parallel_for(samples.size(), threads, [&](std::size_t i) {
    if (!samples[i].valid()) return;
    try {
      out[i] = homogenize_graph(*samples[i].repaired, c.rho, c.material);
    } catch (const Error&) {
    }
  });
  return out;
}

void write_family(const std::string& path, const std::vector<LatentSample>& s, const std::vector<double>& values,
                  const std::vector<std::optional<StiffnessRecord>>& fe) {
  if (path.empty() || path == "-") {
    io::write_family_csv(std::cout, s, values, fe);
    return;
  }
  auto f = io::open_out(path);
  io::write_family_csv(f, s, values, fe);
}

TrussGraph graph_from_json(const nlohmann::json& j) {
  TrussGraph g;
  for (const auto& b : j.at("beams")) g.add_beam(b.at(0).get<int>(), b.at(1).get<int>());
  const auto off = j.at("offsets").get<std::vector<double>>();
  if (off.size() != kNumOffsets) throw FormatError("graph offsets must have 27 entries");
  for (int k = 0; k < kNumOffsets; ++k) g.offsets()[k] = off[std::size_t(k)];
  return g;
}

int run(int argc, char** argv) {
  CLI::App app{"Graph-based truss metamaterial design: generation, homogenization, VAE training, inverse design"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("-c,--config", g.config_path, "JSON configuration file (flat dotted keys)");
  app.add_option("--seed", g.seed, "Overrides every rng seed in the configuration");
  app.add_option("--threads", g.threads, "Worker threads (0 = hardware concurrency)");

  // generate
  std::string gen_out;
  auto* gen = app.add_subcommand("generate", "Generate unlabeled truss structures");
  gen->add_option("-o,--out", gen_out, "Output dataset file")->required();

  // homogenize
  std::string hom_in, hom_out, hom_labels, hom_surface;
  std::optional<std::size_t> hom_index;
  auto* hom = app.add_subcommand("homogenize", "Label a dataset with FE stiffness (or attach curve labels)");
  hom->add_option("-i,--in", hom_in, "Input dataset")->required();
  hom->add_option("-o,--out", hom_out, "Labeled output dataset");
  hom->add_option("--labels", hom_labels, "Attach curve13 labels from CSV instead of homogenizing");
  hom->add_option("--index", hom_index, "Homogenize one record and print its elastic metrics");
  hom->add_option("--surface", hom_surface, "With --index: write the directional modulus surface as CSV");

  // train
  std::string tr_data, tr_out, tr_history;
  auto* tr = app.add_subcommand("train", "Train the VAE and property predictor");
  tr->add_option("-d,--data", tr_data, "Labeled dataset")->required();
  tr->add_option("-o,--out", tr_out, "Checkpoint file")->required();
  tr->add_option("--history", tr_history, "Per-epoch metrics CSV");

  // evaluate
  std::string ev_data, ev_model, ev_out;
  auto* ev = app.add_subcommand("evaluate", "Reconstruction, prediction and validity metrics on the test split");
  ev->add_option("-d,--data", ev_data, "Labeled dataset used for training")->required();
  ev->add_option("-m,--model", ev_model, "Checkpoint")->required();
  ev->add_option("-o,--out", ev_out, "Report JSON (default stdout)");

  // sample
  std::string sa_model, sa_out, sa_export;
  int sa_n = 100;
  auto* sa = app.add_subcommand("sample", "Decode draws from the prior");
  sa->add_option("-m,--model", sa_model, "Checkpoint")->required();
  sa->add_option("-n,--count", sa_n, "Number of samples");
  sa->add_option("-o,--out", sa_out, "CSV of samples (default stdout)");
  sa->add_option("--export-dir", sa_export, "Write OBJ wireframes of valid samples here");

  // traverse
  std::string tv_model, tv_data, tv_out, tv_export;
  int tv_axis = 0, tv_steps = 9;
  double tv_lo = -2.0, tv_hi = 2.0;
  std::optional<std::size_t> tv_index;
  auto* tv = app.add_subcommand("traverse", "Vary one latent axis");
  tv->add_option("-m,--model", tv_model, "Checkpoint")->required();
  tv->add_option("--axis", tv_axis, "Latent axis");
  tv->add_option("--lo", tv_lo, "Range start");
  tv->add_option("--hi", tv_hi, "Range end");
  tv->add_option("--steps", tv_steps, "Number of points");
  tv->add_option("-d,--data", tv_data, "Dataset supplying the base point");
  tv->add_option("--index", tv_index, "Record whose latent mean is the base point (default: origin)");
  tv->add_option("-o,--out", tv_out, "CSV (default stdout)");
  tv->add_option("--export-dir", tv_export, "Write OBJ wireframes here");

  // interpolate
  std::string ip_model, ip_data, ip_out, ip_export;
  std::size_t ip_from = 0, ip_to = 1;
  int ip_steps = 20;
  bool ip_fe = false;
  auto* ip = app.add_subcommand("interpolate", "Spherical interpolation between two dataset structures");
  ip->add_option("-m,--model", ip_model, "Checkpoint")->required();
  ip->add_option("-d,--data", ip_data, "Dataset")->required();
  ip->add_option("--from", ip_from, "First record index");
  ip->add_option("--to", ip_to, "Second record index");
  ip->add_option("--steps", ip_steps, "Number of points including the endpoints");
  ip->add_flag("--fe", ip_fe, "Also homogenize every valid step");
  ip->add_option("-o,--out", ip_out, "CSV (default stdout)");
  ip->add_option("--export-dir", ip_export, "Write OBJ wireframes here");

  // optimize
  std::string op_model, op_data, op_out, op_export;
  auto* op = app.add_subcommand("optimize", "Gradient-based inverse design in the latent space");
  op->add_option("-m,--model", op_model, "Checkpoint")->required();
  op->add_option("-d,--data", op_data, "Labeled dataset for seed selection")->required();
  op->add_option("-o,--out", op_out, "Report JSON (default stdout)");
  op->add_option("--export", op_export, "OBJ wireframe of the best design");

  // verify
  std::string vf_report, vf_out;
  auto* vf = app.add_subcommand("verify", "FE re-homogenization of the candidates in an optimization report");
  vf->add_option("-r,--report", vf_report, "Optimization report JSON")->required();
  vf->add_option("-o,--out", vf_out, "Ranked JSON (default stdout)");

  // export
  std::string ex_data, ex_out, ex_format = "obj";
  std::size_t ex_index = 0;
  auto* ex = app.add_subcommand("export", "Write the unit cell of one record as OBJ or beam CSV");
  ex->add_option("-d,--data", ex_data, "Dataset")->required();
  ex->add_option("--index", ex_index, "Record index");
  ex->add_option("--format", ex_format, "obj or csv");
  ex->add_option("-o,--out", ex_out, "Output file")->required();

  // config dump
  auto* cfg = app.add_subcommand("config", "Configuration utilities");
  cfg->require_subcommand(1);
  auto* dump = cfg->add_subcommand("dump", "Print every configuration key with its effective value");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  const auto t0 = std::chrono::steady_clock::now();
  auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(); };
  const io::RunConfig c = load(g);

  if (dump->parsed()) {
    std::cout << io::dump_config(c) << '\n';
  } else if (gen->parsed()) {
    const auto records = generate_dataset(c.datagen, g.threads);
    io::DatasetHeader h;
    h.rho = c.rho;
    h.material = c.material;
    h.datagen_hash = c.datagen.hash();
    io::write_dataset(gen_out, h, records);
    std::cerr << "generated " << records.size() << " structures in " << elapsed() << " s\n";
  } else if (hom->parsed()) {
    io::DatasetFile d = io::read_dataset(hom_in);
    if (hom_index) {
      if (*hom_index >= d.records.size()) throw RangeError("record index out of range");
      const HomogenizationResult r = homogenize_full(sized_cell(d.records[*hom_index].graph, c.rho), c.material);
      const ElasticMetrics m = elastic_metrics(r.stiffness);
      nlohmann::json j = {{"seed", report_seed(g, c)},
                          {"stiffness", std::vector<double>(r.stiffness.s.begin(), r.stiffness.s.end())},
                          {"youngs", m.youngs},
                          {"shear", m.shear},
                          {"nu12", m.nu(1, 2)}, {"nu13", m.nu(1, 3)}, {"nu21", m.nu(2, 1)},
                          {"nu23", m.nu(2, 3)}, {"nu31", m.nu(3, 1)}, {"nu32", m.nu(3, 2)},
                          {"bulk_voigt", m.bulk_voigt}, {"shear_voigt", m.shear_voigt},
                          {"bulk_reuss", m.bulk_reuss}, {"shear_reuss", m.shear_reuss},
                          {"anisotropy", m.anisotropy}, {"max_coupling", r.max_coupling}};
      std::cout << j.dump(2) << '\n';
      if (!hom_surface.empty()) {
        auto f = io::open_out(hom_surface);
        io::write_surface_csv(f, sample_elastic_surface(r.stiffness, c.surface_theta, c.surface_phi));
      }
    } else {
      if (hom_out.empty()) throw ConfigError("homogenize needs --out (or --index)");
      io::DatasetHeader h = d.header;
      h.rho = c.rho;
      h.material = c.material;
      h.labeled = true;
      if (!hom_labels.empty()) {
        const std::size_t removed = io::attach_curve_labels(d.records, io::read_curve_labels(hom_labels));
        h.kind = PropertyKind::curve13;
        std::cerr << "attached curve labels; " << removed << " records without labels removed\n";
      } else {
        const auto dropped = label_stiffness(d.records, c.rho, c.material, g.threads);
        h.kind = PropertyKind::stiffness9;
        for (const DroppedRecord& r : dropped) std::cerr << "dropped record " << r.index << ": " << r.reason << '\n';
      }
      io::write_dataset(hom_out, h, d.records);
      std::cerr << "labeled " << d.records.size() << " structures in " << elapsed() << " s\n";
    }
  } else if (tr->parsed()) {
    const auto records = labeled_records(tr_data, dataset_kind(tr_data));
    std::optional<std::ofstream> hist;
    if (!tr_history.empty()) {
      hist = io::open_out(tr_history);
      *hist << "epoch,beta,total,recon_a,recon_x,prop,kld,val_accuracy,val_prop_mse\n";
    }
    const TrainResult r = train(records, c.train, c.layout, g.threads, [&](const EpochMetrics& m) {
      std::cerr << "epoch " << m.epoch << " beta " << m.beta << " loss " << m.train.total << " val_acc "
                << m.val_accuracy << '\n';
      if (hist)
        *hist << m.epoch << ',' << io::format_double(m.beta) << ',' << io::format_double(m.train.total) << ','
              << io::format_double(m.train.recon_a) << ',' << io::format_double(m.train.recon_x) << ','
              << io::format_double(m.train.prop) << ',' << io::format_double(m.train.kld) << ','
              << io::format_double(m.val_accuracy) << ',' << io::format_double(m.val_prop_mse) << '\n';
    });
    io::write_checkpoint(tr_out, r.model);
    std::cerr << "trained in " << elapsed() << " s\n";
  } else if (ev->parsed()) {
    const ModelState m = io::read_checkpoint(ev_model, c.layout);
    const auto records = labeled_records(ev_data, m.kind);
    const DataSplit split = split_indices(records.size(), c.train);
    const EvalMetrics em = evaluate(m, encode_records(records, split.test), c.validity_samples, report_seed(g, c), g.threads);
    write_json(ev_out, io::evaluation_report(em, report_seed(g, c)));
  } else if (sa->parsed()) {
    const ModelState m = io::read_checkpoint(sa_model, c.layout);
    const auto samples = sample_prior(m, sa_n, report_seed(g, c), g.threads);
    write_family(sa_out, samples, {}, {});
    export_family(sa_export, samples, c.rho);
    std::cerr << "validity " << validity_fraction(samples) << " over " << samples.size() << " samples\n";
  } else if (tv->parsed()) {
    const ModelState m = io::read_checkpoint(tv_model, c.layout);
    TraversalSpec spec;
    spec.base = Eigen::VectorXd::Zero(m.layout.d());
    if (tv_index) {
      if (tv_data.empty()) throw ConfigError("--index needs --data");
      const io::DatasetFile d = io::read_dataset(tv_data);
      if (*tv_index >= d.records.size()) throw RangeError("record index out of range");
      spec.base = encode(m, d.records[*tv_index].graph).mu.row(0).transpose();
    }
    spec.axis = tv_axis;
    spec.lo = tv_lo;
    spec.hi = tv_hi;
    spec.steps = tv_steps;
    const Traversal t = traverse(m, spec, g.threads);
    std::cerr << "axis " << tv_axis << " is " << to_string(t.partition) << "-specific\n";
    write_family(tv_out, t.points, t.values, {});
    export_family(tv_export, t.points, c.rho);
  } else if (ip->parsed()) {
    const ModelState m = io::read_checkpoint(ip_model, c.layout);
    const io::DatasetFile d = io::read_dataset(ip_data);
    if (ip_from >= d.records.size() || ip_to >= d.records.size()) throw RangeError("record index out of range");
    const Eigen::VectorXd z1 = encode(m, d.records[ip_from].graph).mu.row(0).transpose();
    const Eigen::VectorXd z2 = encode(m, d.records[ip_to].graph).mu.row(0).transpose();
    const auto path = slerp_path(z1, z2, ip_steps);
    const auto samples = evaluate_latents(m, path, g.threads);
    std::vector<double> alphas;
    for (int i = 0; i < ip_steps; ++i) alphas.push_back(double(i) / double(ip_steps - 1));
    write_family(ip_out, samples, alphas, ip_fe ? fe_family(samples, c, g.threads) : decltype(fe_family(samples, c, 0)){});
    export_family(ip_export, samples, c.rho);
    std::cerr << "valid steps " << validity_fraction(samples) << '\n';
  } else if (op->parsed()) {
    const Objective obj = c.make_objective();
    const ModelState m = io::read_checkpoint(op_model, c.layout, obj.property_kind());
    const auto records = labeled_records(op_data, obj.property_kind());
    bool truncated = false;
    const auto seeds = seed_selection(records, m, obj, std::size_t(c.num_seeds), &truncated);
    if (truncated) std::cerr << "warning: dataset smaller than the requested seed count; using " << seeds.size() << '\n';
    const OptimRun run = optimize(m, obj, seeds, records, c.optimize, g.threads);
    write_json(op_out, io::optimization_report(run, report_seed(g, c)));
    if (!op_export.empty())
      io::export_geometry(sized_cell(run.best().graph, c.rho), io::GeometryFormat::obj_wireframe, op_export);
    std::cerr << "best FE objective "
              << (run.best().fe_objective ? io::format_double(*run.best().fe_objective) : std::string("n/a")) << " in "
              << elapsed() << " s\n";
  } else if (vf->parsed()) {
    auto f = io::open_in(vf_report);
    nlohmann::json rep;
    try {
      f >> rep;
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(std::string("report is not valid JSON: ") + e.what());
    }
    Objective obj = c.make_objective();
    try {
      obj.kind = parse_objective_kind(rep.at("objective").get<std::string>());
      if (obj.is_match()) obj.target = PropertyVector{obj.property_kind(), c.target};
      std::vector<VerifiedCandidate> cands;
      for (const auto& cj : rep.at("candidates_fe_order")) {
        VerifiedCandidate vc;
        vc.graph = graph_from_json(cj.at("graph"));
        vc.seed_index = cj.at("seed_index").get<std::size_t>();
        vc.from_seed = cj.at("from_seed").get<bool>();
        if (!cj.at("predicted_objective").is_null()) vc.predicted_objective = cj.at("predicted_objective").get<double>();
        cands.push_back(std::move(vc));
      }
      verify(cands, obj, c.material, c.rho, g.threads);
      nlohmann::json out = nlohmann::json::array();
      for (const VerifiedCandidate& vc : cands)
        out.push_back({{"seed_index", vc.seed_index},
                       {"from_seed", vc.from_seed},
                       {"predicted_objective", io::number_json(vc.predicted_objective)},
                       {"fe_objective", vc.fe_objective ? io::number_json(*vc.fe_objective) : nlohmann::json()},
                       {"note", vc.note},
                       {"graph", io::graph_json(vc.graph)}});
      write_json(vf_out, {{"seed", report_seed(g, c)}, {"objective", std::string(to_string(obj.kind))}, {"ranked", out}});
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(std::string("malformed report: ") + e.what());
    }
  } else if (ex->parsed()) {
    const io::DatasetFile d = io::read_dataset(ex_data);
    if (ex_index >= d.records.size()) throw RangeError("record index out of range");
    io::export_geometry(sized_cell(d.records[ex_index].graph, c.rho), io::parse_geometry_format(ex_format), ex_out);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const trussvae::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return 1;
  } catch (const trussvae::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return 3;
  } catch (const trussvae::MechanismError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return 3;
  } catch (const trussvae::NotPositiveDefinite& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return 3;
  } catch (const trussvae::SymmetryViolation& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return 3;
  } catch (const trussvae::OptimizationFailed& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return 3;
  } catch (const trussvae::GenerationExhausted& e) {
    std::cerr << "generation failed: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  }
}

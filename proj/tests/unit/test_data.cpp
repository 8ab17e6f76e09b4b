#include "aunet/dataset.hpp"
#include "aunet/nifti.hpp"
#include "aunet/phantom.hpp"
#include "aunet/preprocess.hpp"

#include "../nifti_fixture.hpp"
#include "../support.hpp"

#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>

using namespace aunet;
using aunet::testing::NiftiFixture;
using aunet::testing::read_bytes;
using aunet::testing::TempDir;

namespace {

Volume ramp_volume(Index x, Index y, Index z) {
  Volume v;
  v.dims = {x, y, z};
  v.voxels = Eigen::ArrayXf::LinSpaced(x * y * z, 0.0f, static_cast<float>(x * y * z - 1)) * 0.5f;
  return v;
}

NiftiFixture ramp_fixture(bool big_endian) {
  NiftiFixture f({16, 16, 8}, big_endian);
  for (int i = 0; i < 16 * 16 * 8; ++i) f.append(0.25f * static_cast<float>(i) - 100.0f);
  return f;
}

}  // namespace

TEST_CASE("nifti reader parses independent fixtures in both byte orders") {
  TempDir dir;
  for (bool big : {false, true}) {
    CAPTURE(big);
    ramp_fixture(big).write(dir / "f.nii");
    const Volume v = read_nifti(dir / "f.nii");
    CHECK(v.dims == std::array<Index, 3>{16, 16, 8});
    for (Index i = 0; i < v.voxel_count(); ++i) {
      REQUIRE(v.voxels[i] == 0.25f * static_cast<float>(i) - 100.0f);
    }
    CHECK(v.at(3, 2, 1) == 0.25f * static_cast<float>(3 + 16 * (2 + 16 * 1)) - 100.0f);
  }
}

TEST_CASE("big-endian fixture has a byte-swapped sizeof_hdr") {
  const std::string bytes = ramp_fixture(true).bytes();
  std::int32_t raw = 0;
  std::memcpy(&raw, bytes.data(), 4);
  CHECK(raw == 1543569408);
}

TEST_CASE("nifti reader rejects detached headers and short payloads") {
  TempDir dir;
  NiftiFixture f = ramp_fixture(false);
  f.set_magic("ni1");
  f.write(dir / "pair.nii");
  try {
    read_nifti(dir / "pair.nii");
    FAIL("expected an error");
  } catch (const NiftiError& e) {
    CHECK(e.field() == NiftiField::Magic);
  }
  NiftiFixture short_payload({4, 4, 4}, false);
  short_payload.append(1.0f);
  short_payload.write(dir / "short.nii");
  try {
    read_nifti(dir / "short.nii");
    FAIL("expected an error");
  } catch (const NiftiError& e) {
    CHECK(e.field() == NiftiField::Payload);
  }
  CHECK_THROWS_AS(read_nifti(dir / "absent.nii"), NiftiError);
}

TEST_CASE("nifti reader applies slope and intercept") {
  TempDir dir;
  NiftiFixture f({2, 1, 1}, false);
  f.set_slope(2.0f, 1.0f);
  f.append(3.0f);
  f.append(-1.0f);
  f.write(dir / "s.nii");
  const Volume v = read_nifti(dir / "s.nii");
  CHECK(v.voxels[0] == 7.0f);
  CHECK(v.voxels[1] == -1.0f);
}

TEST_CASE("nifti writer round trips in both byte orders and integer types") {
  TempDir dir;
  const Volume v = ramp_volume(5, 4, 3);
  for (bool big : {false, true}) {
    write_nifti(dir / "w.nii", v, NiftiDatatype::Float32, big);
    const Volume back = read_nifti(dir / "w.nii");
    CHECK(back.dims == v.dims);
    CHECK((back.voxels == v.voxels).all());
    CHECK(read_bytes(dir / "w.nii").size() == 352 + 4 * 60);
  }
  Volume labels;
  labels.dims = {2, 2, 1};
  labels.voxels = (Eigen::ArrayXf(4) << 0, 1, 2, 4).finished();
  for (NiftiDatatype t : {NiftiDatatype::UInt8, NiftiDatatype::Int16, NiftiDatatype::Float64}) {
    write_nifti(dir / "l.nii", labels, t, true);
    CHECK((read_nifti(dir / "l.nii").voxels == labels.voxels).all());
  }
}

TEST_CASE("slice window indices") {
  const auto z = window_indices(155, SliceWindow{});
  CHECK(z.size() == 100);
  CHECK(z.front() == 22);
  CHECK(z.back() == 121);
  CHECK(window_indices(8, SliceWindow{2, 4}).size() == 4);
  CHECK_THROWS_AS(window_indices(100, SliceWindow{}), RangeError);
}

TEST_CASE("axial slices index rows by y and columns by x") {
  const Volume v = ramp_volume(3, 2, 2);
  const Image s = axial_slice(v, 1);
  CHECK(s.rows() == 2);
  CHECK(s.cols() == 3);
  CHECK(s(1, 2) == v.at(2, 1, 1));
}

TEST_CASE("resizing constants, identity and interior interpolation") {
  const Image c = Image::Constant(7, 5, 0.3f);
  CHECK((resize_image(c, 16, 9) == 0.3f).all());
  std::mt19937_64 rng(1);
  Image r(128, 128);
  std::uniform_real_distribution<float> u(0, 1);
  for (Index i = 0; i < r.size(); ++i) r.data()[i] = u(rng);
  CHECK((resize_image(r, 128, 128) == r).all());
  LabelImage m(128, 128);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<std::int32_t>(i % 4);
  CHECK((resize_mask(m, 128, 128) == m).all());

  Image checker(2, 2);
  checker << 0, 1, 1, 0;
  const Image up = resize_image(checker, 4, 4);
  for (Index i = 1; i <= 2; ++i)
    for (Index j = 1; j <= 2; ++j) {
      CHECK(up(i, j) > 0.0f);
      CHECK(up(i, j) < 1.0f);
    }
  // Sample points 0.25 and 0.75: weights 3/4 and 1/4.
  CHECK(up(1, 1) == doctest::Approx(0.375));
  CHECK(up(0, 0) == 0.0f);
}

TEST_CASE("nearest-neighbour mask resize keeps the label alphabet") {
  LabelImage m(4, 4);
  for (Index i = 0; i < 16; ++i) m.data()[i] = static_cast<std::int32_t>(i / 4);
  const LabelImage down = resize_mask(m, 2, 2);
  CHECK(down(0, 0) == 0);
  CHECK(down(1, 0) == 2);
  const LabelImage up = resize_mask(m, 8, 8);
  CHECK(up(0, 0) == 0);
  CHECK(up(7, 7) == 3);
}

TEST_CASE("label remapping") {
  LabelImage m(1, 4);
  m << 0, 1, 2, 4;
  LabelImage expected(1, 4);
  expected << 0, 1, 2, 3;
  CHECK((remap_labels(m) == expected).all());
  CHECK((remap_labels(LabelImage::Zero(3, 3)) == 0).all());
  LabelImage bad(1, 2);
  bad << 0, 3;
  CHECK_THROWS_AS(remap_labels(bad), ContractError);
  bad << 0, 5;
  CHECK_THROWS_AS(remap_labels(bad), ContractError);
}

TEST_CASE("one-hot encoding and its argmax round trip") {
  LabelImage m(2, 3);
  m << 0, 1, 2, 3, 3, 0;
  const TensorF h = one_hot(m);
  CHECK(h.shape() == Shape{4, 2, 3});
  CHECK(h[3 * 6 + 3] == 1.0f);
  for (Index p = 0; p < 6; ++p) {
    float s = 0;
    for (Index c = 0; c < 4; ++c) s += h[c * 6 + p];
    CHECK(s == 1.0f);
  }
  const LabelMap back = kernels::argmax_channels(h.reshaped({1, 4, 2, 3}));
  for (Index p = 0; p < 6; ++p) CHECK(back[p] == m.data()[p]);
  CHECK_THROWS_AS(one_hot(LabelImage::Constant(1, 1, 4)), ContractError);
}

TEST_CASE("per-volume min-max normalization") {
  Volume v;
  v.dims = {101, 1, 1};
  v.voxels = Eigen::ArrayXf::LinSpaced(101, 0.0f, 100.0f);
  const Volume n = normalize(v);
  CHECK(n.voxels.minCoeff() == 0.0f);
  CHECK(n.voxels.maxCoeff() == 1.0f);
  CHECK(n.voxels[50] == doctest::Approx(0.5));
  Volume c;
  c.dims = {2, 2, 2};
  c.voxels = Eigen::ArrayXf::Constant(8, 7.0f);
  CHECK((normalize(c).voxels == 0.0f).all());
  std::mt19937_64 rng(2);
  std::normal_distribution<float> g(3.0f, 40.0f);
  Volume r;
  r.dims = {7, 5, 3};
  r.voxels.resize(105);
  for (Index i = 0; i < 105; ++i) r.voxels[i] = g(rng);
  CHECK(normalize(r).voxels.minCoeff() == 0.0f);
  CHECK(normalize(r).voxels.maxCoeff() == 1.0f);
}

TEST_CASE("dataset split excludes the invalid case and gives the remainder to training") {
  std::vector<std::string> ids;
  for (int i = 0; i < 10; ++i) ids.push_back("case_" + std::to_string(i));
  const DatasetSplit s = split_dataset(ids);
  CHECK(s.train.size() == 8);
  CHECK(s.validation.size() == 1);
  CHECK(s.test.size() == 1);
  std::set<std::string> seen(s.train.begin(), s.train.end());
  seen.insert(s.validation.begin(), s.validation.end());
  seen.insert(s.test.begin(), s.test.end());
  CHECK(seen.size() == 10);
  const DatasetSplit again = split_dataset(ids);
  CHECK(again.train == s.train);
  CHECK(again.test == s.test);

  ids.push_back("BraTS20_Training_355");
  const DatasetSplit ex = split_dataset(ids);
  for (const auto* part : {&ex.train, &ex.validation, &ex.test}) {
    CHECK(std::find(part->begin(), part->end(), "BraTS20_Training_355") == part->end());
  }
  CHECK(ex.excluded == std::vector<std::string>{"BraTS20_Training_355"});
}

TEST_CASE("batch generator partitions each epoch") {
  auto samples = std::make_shared<std::vector<SliceSample>>();
  for (int i = 0; i < 10; ++i) {
    SliceSample s;
    s.case_id = "c";
    s.z = i;
    s.image = TensorF::constant({1, 2, 2}, static_cast<float>(i));
    s.mask = TensorF({4, 2, 2});
    samples->push_back(s);
  }
  BatchGenerator gen(samples, 4, true, 9);
  BatchGenerator twin(samples, 4, true, 9);
  for (int epoch = 0; epoch < 2; ++epoch) {
    std::vector<std::size_t> sizes, seen;
    while (auto b = gen.next_batch()) {
      auto t = twin.next_batch();
      REQUIRE(t);
      CHECK(t->indices == b->indices);
      CHECK(b->images.shape()[0] == static_cast<Index>(b->indices.size()));
      CHECK(b->images(0, 0, 0, 0) == static_cast<float>(b->indices[0]));
      sizes.push_back(b->indices.size());
      seen.insert(seen.end(), b->indices.begin(), b->indices.end());
    }
    CHECK_FALSE(twin.next_batch());
    CHECK(sizes == std::vector<std::size_t>{4, 4, 2});
    std::sort(seen.begin(), seen.end());
    for (std::size_t i = 0; i < 10; ++i) CHECK(seen[i] == i);
  }
  CHECK(gen.batches_per_epoch() == 3);
}

TEST_CASE("phantom generation is deterministic and nested") {
  const auto a = generate_phantom(5, 2, {40, 36, 12});
  const auto b = generate_phantom(5, 2, {40, 36, 12});
  REQUIRE(a.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK((a[i].volumes.flair.voxels == b[i].volumes.flair.voxels).all());
    CHECK((a[i].volumes.t1ce.voxels == b[i].volumes.t1ce.voxels).all());
    CHECK((a[i].volumes.seg.voxels == b[i].volumes.seg.voxels).all());
  }
  CHECK_FALSE((generate_phantom(6, 1, {40, 36, 12})[0].volumes.flair.voxels ==
               a[0].volumes.flair.voxels).all());
  for (const auto& c : a) {
    const Volume& seg = c.volumes.seg;
    std::set<float> labels;
    for (Index z = 0; z < 12; ++z)
      for (Index y = 0; y < 36; ++y)
        for (Index x = 0; x < 40; ++x) {
          labels.insert(seg.at(x, y, z));
          const double px = static_cast<double>(x), py = static_cast<double>(y), pz = static_cast<double>(z);
          if (c.lesion.necrotic.contains(px, py, pz)) CHECK(c.lesion.enhancing.contains(px, py, pz));
          if (c.lesion.enhancing.contains(px, py, pz)) CHECK(c.lesion.edema.contains(px, py, pz));
        }
    CHECK(labels == std::set<float>{0, 1, 2, 4});
  }
  CHECK_THROWS_AS(generate_phantom(1, 1, {8, 8, 8}), ContractError);
}

TEST_CASE("phantom cases round trip through disk and the pipeline") {
  TempDir dir;
  const auto cases = generate_phantom(3, 2, {32, 32, 8});
  for (const auto& c : cases) write_phantom_case(dir.path(), c);
  const auto records = discover_cases(dir.path());
  REQUIRE(records.size() == 2);
  CHECK(records[0].id == "phantom_000");
  const CaseVolumes loaded = load_case(records[0]);
  CHECK((loaded.seg.voxels == cases[0].volumes.seg.voxels).all());
  CHECK((loaded.flair.voxels == cases[0].volumes.flair.voxels).all());

  PipelineOptions opts;
  opts.window = {2, 4};
  opts.image_size = 16;
  const auto samples = preprocess_case(loaded, opts);
  REQUIRE(samples.size() == 4);
  CHECK(samples[0].z == 2);
  CHECK(samples[0].image.shape() == Shape{2, 16, 16});
  CHECK(samples[0].mask.shape() == Shape{4, 16, 16});
  CHECK(samples[0].image.vec().minCoeff() >= 0.0f);
  CHECK(samples[0].image.vec().maxCoeff() <= 1.0f);
  const SliceSample single = preprocess_slice(loaded, 3, opts);
  CHECK(single.image == samples[1].image);
  CHECK(single.mask == samples[1].mask);
  CHECK_THROWS_AS(preprocess_slice(loaded, 8, opts), RangeError);
  opts.modalities = {Modality::T1ce};
  CHECK(preprocess_case(loaded, opts)[0].image.shape() == Shape{1, 16, 16});
  CHECK_THROWS_AS(discover_cases(dir / "missing"), ContractError);
}

#pragma once

#include "vdpu/cifar.hpp"
#include "vdpu/compiler.hpp"
#include "vdpu/dpusim.hpp"
#include "vdpu/error.hpp"
#include "vdpu/graph.hpp"
#include "vdpu/harness.hpp"
#include "vdpu/model_io.hpp"
#include "vdpu/passes.hpp"
#include "vdpu/quantizer.hpp"
#include "vdpu/ref_exec.hpp"
#include "vdpu/target.hpp"
#include "vdpu/tensor.hpp"

#pragma once

#include "ccilab/common.hpp"
#include "ccilab/lattice.hpp"
#include "ccilab/linalg.hpp"
#include "ccilab/operator.hpp"
#include "ccilab/flux.hpp"
#include "ccilab/fiber.hpp"
#include "ccilab/dynamics.hpp"

#pragma once

#include "uotv/field.hpp"
#include "uotv/divergences.hpp"
#include "uotv/support.hpp"
#include "uotv/kernels.hpp"
#include "uotv/sinkhorn.hpp"
#include "uotv/sinkhorn_divergence.hpp"
#include "uotv/diagnostics.hpp"
#include "uotv/cases.hpp"
#include "uotv/oracle.hpp"

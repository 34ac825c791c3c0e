import itertools, numpy as np, cvxpy as cp
def hstates(m):
    H=np.array([[1,1],[1,-1]])/np.sqrt(2); Hm=np.array([[1.0]])
    for _ in range(m): Hm=np.kron(Hm,H)
    return Hm  # column x = |psi_x>
def solve(m,eps,f):
    D=2**m; Hm=hstates(m)
    M=[cp.Variable((D,D),symmetric=True) for _ in range(D)]
    cons=[Mi>>0 for Mi in M]+[sum(M)==np.eye(D)]
    cons.append(sum(M[z][z,z] for z in range(D))/D>=1-eps)
    obj=sum(Hm[:,x]@M[f[x]]@Hm[:,x] for x in range(D))/D
    p=cp.Problem(cp.Maximize(obj),cons); p.solve(solver=cp.CLARABEL)
    return p.value
grid=[0.01+0.03*k for k in range(9)]
for m in (1,2):
    D=2**m
    for eps in grid:
        best=max(solve(m,eps,f) for f in itertools.product(range(D),repeat=D))
        print(m,round(eps,2),"%.9f"%best)

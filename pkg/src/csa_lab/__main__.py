from csa_lab.cli import main

main()
